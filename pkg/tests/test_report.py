import math

from rbksim.report import OracleReport, dump_reports, load_reports


def test_roundtrip(tmp_path):
    reps = [
        OracleReport.from_residual("a", 1.0 / 3.0, 1e-6, message="m", n=4, rows=[(32, 0.1)]),
        OracleReport.skip("b", "not applicable"),
        OracleReport("c", 2.0, 0.0, False, context={"support": [1, 2]}),
    ]
    path = tmp_path / "r.json"
    dump_reports(reps, path)
    back = load_reports(path)
    assert [r.status for r in back] == ["fail", "skipped", "fail"] or back[0].passed is False
    assert back[0].residual == 1.0 / 3.0 and back[0].context["n"] == 4
    assert back[1].skipped and back[1].residual is None
    assert back[2].context == {"support": [1, 2]}
    for r, s in zip(reps, back):
        assert (r.check, r.tolerance, r.passed, r.skipped, r.message) == (s.check, s.tolerance, s.passed, s.skipped,
                                                                           s.message)


def test_pass_iff_residual_within_tolerance():
    assert OracleReport.from_residual("x", 1e-7, 1e-6).passed
    assert not OracleReport.from_residual("x", 2e-6, 1e-6).passed
    assert OracleReport.from_residual("x", 0.0, 0.0).passed
    assert not OracleReport.from_residual("x", math.nan, 1.0).passed
