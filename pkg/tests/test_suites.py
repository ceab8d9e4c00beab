import pytest

from lepage.suites import CRITERIA, SUITES, CheckResult, run_criterion, run_suite


def test_registry_is_complete():
    assert sorted(CRITERIA) == list(range(1, 14))
    assert SUITES["paper-identities"] == sorted(CRITERIA)


def test_check_result_serialization():
    r = CheckResult("x", True, 0.5, 1.0, runtime=2.0, detail={"a": 1})
    assert "runtime" not in r.as_dict(timings=False)
    assert r.as_dict()["runtime"] == 2.0


def test_run_criterion_names_and_times():
    r = run_criterion(9, samples=20)
    assert r.name.startswith("9. ") and r.runtime > 0 and r.passed


def test_unknown_suite():
    with pytest.raises(KeyError):
        run_suite("nope")
