"""Full-scale acceptance criteria, one test each.

Each test prints a single [PASS]/[FAIL] line with the measured value and the
seeds to replay. Run them alone with `pytest tests/test_acceptance.py -s`.
"""

import pytest

from aleph_lab import suites


@pytest.mark.slow
@pytest.mark.parametrize("name", list(suites.SUITES))
def test_criterion(name, capsys):
    result = suites.SUITES[name]()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()
