import os
import shutil

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hedonic_esg.panel import CityPanel, YearRow, builtin_atl, builtin_csv_path, serialize_panel

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail=""):
    """Print and remember one acceptance line."""
    line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}"
    if detail:
        line += f" :: {detail}"
    print(line)
    ACCEPTANCE_LINES.append((number, line))
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def atl():
    return builtin_atl()


def synthetic_panel(code, seed, base=None):
    """Random-walk price with ATL-shaped noisy counts."""
    base = base or builtin_atl()
    rng = np.random.default_rng(seed)
    price = 150000.0 * (1.0 + rng.uniform(-0.2, 0.2))
    rows = []
    for r in base.rows:
        price *= np.exp(0.04 + 0.06 * rng.standard_normal())
        counts = []
        for f in ("new_homes", "accessible", "central_ac", "green", "waterfront"):
            lam = max(getattr(r, f), 0) * rng.uniform(0.5, 1.5)
            counts.append(int(rng.poisson(lam)) + (0 if f == "waterfront" else 1))
        rows.append(YearRow(r.year, round(price, 2), *counts))
    return CityPanel(code, tuple(rows))


@pytest.fixture(scope="session")
def city_dir(tmp_path_factory):
    """ATL plus three synthetic cities, one CSV each."""
    d = tmp_path_factory.mktemp("cities")
    shutil.copy(builtin_csv_path("ATL"), d / "ATL.csv")
    for i, code in enumerate(("AUS", "COL", "SEA"), start=1):
        (d / f"{code}.csv").write_text(serialize_panel(synthetic_panel(code, i)))
    return d
