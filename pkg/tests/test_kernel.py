import numpy as np
import pytest

from rbksim.kernel import (Constant, Expression, GrowthClass, KernelSpecError, ProductPower, classify_growth,
                           parse_kernel_spec)
from rbksim.kernel_parser import AsymmetricKernel, ExpressionSyntaxError


def test_eval_examples():
    assert Constant(1).eval(3, 5) == 1
    assert ProductPower(1, 1).eval(2, 3) == 6
    assert ProductPower(1, 0.5).eval(4, 9) == 6


@pytest.mark.parametrize("kernel, cls", [
    (Constant(1), GrowthClass.BOUNDED),
    (ProductPower(1, 0.5), GrowthClass.SQRT_PRODUCT),
    (ProductPower(1, 0.3), GrowthClass.SQRT_PRODUCT),
    (ProductPower(1, 1), GrowthClass.LINEAR_PRODUCT),
    (ProductPower(2, 0.75), GrowthClass.LINEAR_PRODUCT),
    (ProductPower(1, 0.0), GrowthClass.BOUNDED),
])
def test_classify_builtin(kernel, cls):
    for limit in (2, 16, 64, 200):
        assert classify_growth(kernel, limit) == cls


@pytest.mark.parametrize("src, cls", [
    ("3", GrowthClass.BOUNDED),
    ("min(j,k)/max(j,k)", GrowthClass.BOUNDED),
    ("(j*k)^0.5", GrowthClass.SQRT_PRODUCT),
    ("j+k", GrowthClass.LINEAR_PRODUCT),
    ("j*k", GrowthClass.LINEAR_PRODUCT),
    ("(j*k)^2", GrowthClass.UNVERIFIED),
])
def test_classify_expressions(src, cls):
    assert classify_growth(parse_kernel_spec("expr:" + src)) == cls


@pytest.mark.parametrize("kernel", [Constant(2.5), ProductPower(1, 0.5), ProductPower(3, 1),
                                    parse_kernel_spec("expr:min(j,k)+1")])
def test_table_symmetric_and_exact(kernel):
    t = kernel.table(64)
    assert np.array_equal(t, t.T)
    assert t[3, 8] == kernel.eval(4, 9)
    assert not t.flags.writeable


def test_product_power_formula():
    k = ProductPower(1.7, 0.37)
    j = np.arange(1, 65)
    np.testing.assert_allclose(k.table(64), 1.7 * np.outer(j, j) ** 0.37, rtol=1e-15)


@pytest.mark.parametrize("beta", [0.0, 0.5, 0.37, 1.0])
def test_weights_dd_is_more_accurate(beta):
    hi, lo = ProductPower(1, beta).weights_dd(300)
    exact = np.arange(1, 301, dtype=np.longdouble) ** np.longdouble(beta)
    assert np.max(np.abs((hi.astype(np.longdouble) + lo) - exact)) <= np.max(np.abs(hi - exact)) + 1e-30


def test_kernel_specs():
    assert parse_kernel_spec("const:2") == Constant(2)
    assert parse_kernel_spec("product:1,0.5") == ProductPower(1, 0.5)
    assert isinstance(parse_kernel_spec("expr:j+k"), Expression)
    for bad in ("const", "const:x", "product:1", "foo:1", "product:1,2", "const:-1"):
        with pytest.raises(KernelSpecError):
            parse_kernel_spec(bad)
    with pytest.raises(AsymmetricKernel):
        parse_kernel_spec("expr:j-k")
    with pytest.raises(ExpressionSyntaxError):
        parse_kernel_spec("expr:j-")


def test_expression_table_checked_beyond_validation_grid():
    kern = parse_kernel_spec("expr:max(j+k-150,0)*0+1", grid=8)
    assert kern.table(200)[0, 0] == 1
    kern = parse_kernel_spec("expr:min(j,100)*max(k,1)", grid=8)  # symmetric only below 100
    with pytest.raises(AsymmetricKernel):
        kern.table(128)
