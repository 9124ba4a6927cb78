"""Shared meshes and skin fields, built once per session."""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from skinlab.skinfield import metric_skin_transform  # noqa: E402
from skinlab.surface import (generate_catenoid, generate_hyperplane,  # noqa: E402
                             generate_lawson_cone, generate_link)

# criterion lines collected by the acceptance suite, echoed in the terminal summary
CRITERIA_LINES: dict[int, str] = {}


def record(k: int, ok: bool, detail: str) -> None:
    line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    CRITERIA_LINES[k] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA_LINES):
            terminalreporter.write_line(CRITERIA_LINES[k])


def interior(H):
    m = ~H.excluded_mask
    m[H.sigma_idx] = False
    return m


@pytest.fixture(scope="session")
def coarse_cone():
    return generate_lawson_cone(3, 3, 0.05, 4.0, 10, 41)


@pytest.fixture(scope="session")
def small_cone():
    return generate_lawson_cone(3, 3, 0.05, 4.0, 8, 21)


@pytest.fixture(scope="session")
def ref_cone():
    return generate_lawson_cone()


@pytest.fixture(scope="session")
def ref_skin(ref_cone):
    return metric_skin_transform(ref_cone, 1.0)


@pytest.fixture(scope="session")
def link():
    return generate_link(3, 3, 16)


@pytest.fixture(scope="session")
def plane():
    return generate_hyperplane(1.0, 33)


@pytest.fixture(scope="session")
def catenoid():
    return generate_catenoid(1.5, 32)


@pytest.fixture(scope="session")
def small_meshes(coarse_cone, plane, catenoid, link):
    """Every mesh small enough for the quadratic oracle."""
    return {"cone": coarse_cone, "plane": plane, "catenoid": catenoid, "link": link,
            "cone24": generate_lawson_cone(2, 4, 0.05, 4.0, 8, 21)}


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240611)
