import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rbksim.kernel import Constant, ProductPower, parse_kernel_spec
from rbksim.rhs import UnsupportedKernel, eval_fast, eval_naive, evaluate, make_rhs
from rbksim.state import ClusterState

KERNELS = [Constant(1), ProductPower(1, 0.5), ProductPower(1, 1)]


def brute_force(kernel, c):
    # direct transcription of the sums, indices 1-based
    n = len(c)
    a = kernel.eval
    d = np.zeros(n)
    for j in range(1, n + 1):
        gain = sum(a(j + k, k) * c[j + k - 1] * c[k - 1] for k in range(1, n - j + 1))
        loss = c[j - 1] * sum(a(j, k) * c[k - 1] for k in range(1, n + 1))
        d[j - 1] = gain - loss
    return d


@pytest.mark.parametrize("compensated", [False, True])
def test_hand_examples(compensated):
    out = eval_naive(Constant(1), ClusterState([1, 2]), decompose=True, compensated=compensated)
    np.testing.assert_array_equal(out.d, [-1, -6])
    np.testing.assert_array_equal(out.gain - out.loss, out.d)
    np.testing.assert_array_equal(eval_naive(Constant(1), [0, 3]).d, [0, -9])
    np.testing.assert_array_equal(eval_fast(Constant(1), [1, 2]).d, [-1, -6])


@pytest.mark.parametrize("kernel", KERNELS)
def test_zero_state(kernel):
    for n in (1, 5, 300):
        assert not np.any(eval_naive(kernel, np.zeros(n)).d)
        assert not np.any(eval_fast(kernel, np.zeros(n)).d)


def test_single_cluster_has_no_gain():
    assert eval_naive(Constant(2), [3.0]).d[0] == -18.0
    assert eval_fast(Constant(2), [3.0]).d[0] == -18.0


@pytest.mark.parametrize("kernel", KERNELS + [parse_kernel_spec("expr:min(j,k)+1")])
def test_naive_matches_brute_force(kernel):
    rng = np.random.default_rng(1)
    c = rng.random(13)
    np.testing.assert_allclose(eval_naive(kernel, c).d, brute_force(kernel, c), rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("kernel", KERNELS)
@pytest.mark.parametrize("n", [1, 2, 7, 64, 257])
def test_fast_matches_compensated_naive(kernel, n):
    rng = np.random.default_rng(n)
    for _ in range(5):
        c = rng.random(n)
        ref = eval_naive(kernel, c, compensated=True).d
        fast = eval_fast(kernel, c).d
        assert np.max(np.abs(fast - ref) / (1 + np.abs(ref))) <= 1e-12


def test_fast_random_n64_constant():
    c = np.random.default_rng(42).random(64)
    ref = eval_naive(Constant(1), c).d
    assert np.max(np.abs(eval_fast(Constant(1), c).d - ref) / (1 + np.abs(ref))) <= 1e-12


def test_fast_rejects_expression():
    with pytest.raises(UnsupportedKernel):
        eval_fast(parse_kernel_spec("expr:j+k"), np.ones(4))


def test_make_rhs_paths():
    assert make_rhs(Constant(1), 8).path == "naive"
    assert make_rhs(Constant(1), 512).path == "fast"
    assert make_rhs(parse_kernel_spec("expr:j+k"), 512).path == "naive"
    with pytest.raises(ValueError):
        make_rhs(Constant(1), 8, "bogus")
    np.testing.assert_array_equal(evaluate(Constant(1), [1, 2], "fast").d, [-1, -6])


@pytest.mark.parametrize("kernel", KERNELS)
@pytest.mark.parametrize("p", [1, 3, 10])
def test_monodisperse_structure(kernel, p):
    for path in ("naive", "fast"):
        c = np.zeros(12)
        c[p - 1] = 1.5
        d = make_rhs(kernel, 12, path)(c)
        expected = np.zeros(12)
        expected[p - 1] = -kernel.eval(p, p) * 1.5**2
        assert d[p - 1] == pytest.approx(expected[p - 1], rel=1e-15)
        assert not np.any(np.delete(d, p - 1))


sparse_states = st.integers(2, 40).flatmap(lambda n: st.lists(
    st.one_of(st.just(0.0), st.floats(1e-3, 10)), min_size=n, max_size=n))


@settings(max_examples=150, deadline=None)
@given(sparse_states, st.sampled_from(KERNELS), st.sampled_from(["naive", "fast"]))
def test_zero_preservation(c, kernel, path):
    c = np.array(c)
    n = c.size
    d = make_rhs(kernel, n, path)(c)
    pos = c > 0
    for j in range(n):
        if c[j] == 0 and not np.any(pos[j + 1:] & pos[: n - j - 1]):
            assert d[j] == 0.0


@settings(max_examples=150, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=60), st.sampled_from(KERNELS))
def test_sign_structure(c, kernel):
    c = np.array(c)
    d = eval_naive(kernel, c).d
    scale = 1e-12 * (1 + np.abs(eval_naive(kernel, c, decompose=True).loss).sum() * c.size)
    assert d.sum() <= scale
    assert np.arange(1, c.size + 1) @ d <= scale * c.size


def test_naive_deterministic():
    c = np.random.default_rng(3).random(100)
    a = eval_naive(ProductPower(1, 0.5), c).d
    b = eval_naive(ProductPower(1, 0.5), c.copy()).d
    assert a.tobytes() == b.tobytes()
