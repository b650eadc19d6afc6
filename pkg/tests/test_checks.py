import numpy as np
import pytest

from qrc import checks


def test_convergence_suite_on_vigo():
    (r,) = checks.check_convergence(presets=("vigo5",), trials=2)
    assert r.passed and r.bound == pytest.approx(2 * 0.9**50)
    assert r.bound == pytest.approx(1.03e-2, abs=1e-4)


def test_fading_suite_small_presets():
    res = checks.check_fading(presets=("boeblingen4", "ourense5"), samples=10)
    assert all(r.passed for r in res)


@pytest.mark.parametrize("suite", ["estimator", "truncation", "readout_invariance", "separation", "qnd"])
def test_fast_suites_pass(suite):
    res = checks.run_checks(suite, seed=1)
    assert res and all(r.passed for r in res), [r.line() for r in res]


def test_separation_suite_matches_witness():
    res = {r.name: r for r in checks.check_separation()}
    assert "difference=1.8" in res["witness"].detail


def test_result_lines_and_dicts():
    r = checks.CheckResult("s", "n", np.bool_(True), np.float64(0.5), 1, "note")
    assert r.line() == "PASS s/n: measured=0.5 bound=1 note"
    assert checks.as_dicts([r]) == [{"suite": "s", "name": "n", "passed": True, "measured": 0.5, "bound": 1.0, "detail": "note"}]
    with pytest.raises(KeyError):
        checks.run_checks("bogus")
