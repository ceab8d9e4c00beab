"""Acceptance criteria 1-13, one test each.

Every criterion records a one-line verdict; conftest prints them at the end
of the run.  ``python tests/test_acceptance.py`` prints the same lines.
"""
import sys

import pytest

from lepage.suites import CRITERIA, run_criterion

VERDICTS: dict[int, str] = {}


def _line(res) -> str:
    return (f"{'PASS' if res.passed else 'FAIL'}  {res.name}  residual={res.residual:.3e}  "
            f"tolerance={res.tolerance:.1e}  ({res.runtime:.1f}s)")


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    res = run_criterion(number)
    VERDICTS[number] = _line(res)
    assert res.passed, f"{res.name}: {res.detail}"


if __name__ == "__main__":
    ok = True
    for k in sorted(CRITERIA):
        res = run_criterion(k)
        print(_line(res), flush=True)
        ok &= res.passed
    sys.exit(0 if ok else 1)
