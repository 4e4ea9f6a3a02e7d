"""Acceptance criteria A1-A14 at their stated scales and tolerances.

Each test runs one criterion through ``validate.run_criterion`` (the same
code path as ``fasmodel validate --level full``), records a PASS/FAIL line
for the terminal summary and asserts the outcome.  A3 and A7 are expected
to fail; README.md explains why.
"""
import pytest

from fasmodel import validate

from .conftest import ACCEPTANCE_LINES

KEYS = [k for k, _, _ in validate.ACCEPTANCE]


@pytest.mark.acceptance
@pytest.mark.parametrize("key", KEYS)
def test_acceptance(key):
    res = validate.run_criterion(key)
    line = f"{res.line()} [{res.seconds:.1f} s]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert res.passed, line
