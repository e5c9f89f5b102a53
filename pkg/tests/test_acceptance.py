"""Acceptance criteria 1 to 9, each at its stated tolerance.

The benchmark criteria (1, 2, 4, 5, 6) run the full-size problems and take
several minutes in total; runs shared between criteria are cached.
"""

import pytest

from lagdg import acceptance

SLOW = {1, 2, 4, 5, 6}


@pytest.mark.parametrize(
    "number",
    [pytest.param(n, marks=pytest.mark.slow, id=acceptance.NAMES[n]) if n in SLOW
     else pytest.param(n, id=acceptance.NAMES[n]) for n in sorted(acceptance.CHECKS)],
)
def test_criterion(number, acceptance_lines):
    result = acceptance.evaluate(number, seed=0)
    line = result.line()
    print(line)
    acceptance_lines.append(line)
    assert result.passed, line
