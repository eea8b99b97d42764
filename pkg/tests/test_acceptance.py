"""Acceptance suite: every criterion at its full size and stated tolerance.

Each criterion prints one ``[PASS]`` / ``[FAIL]`` line; the lines are also
repeated in the pytest terminal summary. Run standalone with
``python3 tests/test_acceptance.py``.
"""
import sys

import pytest

from dgint import checks

RESULTS = []

CRITERIA = [
    ("exact_conservation", checks.conservation),
    ("order_retention", checks.order_retention),
    ("local_coordinates", checks.local_coordinates),
    ("inward_spiral", checks.spiral_anchors),
    ("derivative_qr", checks.qr_derivative),
    ("jacobians", checks.jacobians),
    ("scheme_equivalence", checks.scheme_equivalence),
    ("scheme_b_symmetry", checks.symmetry),
    ("comparison_harness", checks.comparison),
]


@pytest.mark.acceptance
@pytest.mark.parametrize("check", [c for _, c in CRITERIA], ids=[n for n, _ in CRITERIA])
def test_criterion(check):
    res = check(quick=False)
    line = res.line()
    RESULTS.append(line)
    print(line)
    assert res.passed, line


if __name__ == "__main__":
    results = checks.run_checks(quick=False)
    sys.exit(0 if all(r.passed for r in results) else 1)
