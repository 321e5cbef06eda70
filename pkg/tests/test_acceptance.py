"""Every acceptance criterion at its stated tolerance, one PASS/FAIL line each.

The suite runs once per module on a shared context; each criterion is
then its own test so failures are reported individually.
"""

import pytest

from unirenorm.acceptance import CRITERIA, NUMBERS, Context, run_criterion


@pytest.fixture(scope="module")
def context():
    return Context()


@pytest.mark.slow
@pytest.mark.parametrize("key", list(CRITERIA), ids=[f"{NUMBERS[k]:02d}-{k}" for k in CRITERIA])
def test_criterion(key, context, capsys):
    res = run_criterion(key, context)
    with capsys.disabled():
        print(f"\n{res.line()}")
    assert res.passed, res.line()
