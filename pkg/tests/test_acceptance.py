import pytest

import conftest
from psido.verification import CRITERIA, run_criterion


def _error(check) -> float:
    return check.detail.get("error", check.error)


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda k: f"criterion_{k:02d}")
def test_criterion(number):
    name, _ = CRITERIA[number]
    checks = run_criterion(number)
    assert checks, "criterion produced no checks"
    worst = max(checks, key=lambda c: _error(c) / c.tolerance if c.tolerance else float("inf"))
    failed = [c for c in checks if not c.passed]
    status = "PASS" if not failed else "FAIL"
    line = f"criterion {number}: {status} {name} ({len(checks)} checks, worst {worst.check_id}: err {_error(worst):.2e} / tol {worst.tolerance:.0e})"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert not failed, "; ".join(f"{c.check_id}: err {_error(c):.3e} > tol {c.tolerance:.1e} {c.detail}" for c in failed)
