import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from evrp_iapc.instance import generate_instance, parse_instance  # noqa: E402

MINIMAL_TEXT = """\
NAME: minimal
TYPE: EVRP
VEHICLES: 2
DIMENSION: 3
STATIONS: 1
CAPACITY: 10
ENERGY_CAPACITY: 100
ENERGY_CONSUMPTION: 1.0
EDGE_WEIGHT_FORMAT: EUC_2D
NODE_COORD_SECTION
1 0 0
2 1 0
3 0 1
4 1 1
DEMAND_SECTION
1 0
2 5
3 5
STATIONS_COORD_SECTION
4
DEPOT_SECTION
1
-1
EOF
"""


def benchmark_dir() -> Path | None:
    """Directory holding the benchmark .evrp files, if present on this machine."""
    env = os.environ.get("EVRP_BENCHMARK_DIR")
    candidates = [Path(env)] if env else []
    candidates.append(Path(__file__).resolve().parent.parent / "benchmarks")
    for c in candidates:
        if c.is_dir() and any(c.glob("*.evrp")):
            return c
    return None


def benchmark_file(name: str) -> Path | None:
    root = benchmark_dir()
    if root is None:
        return None
    path = root / f"{name}.evrp"
    return path if path.exists() else None


@pytest.fixture
def minimal():
    return parse_instance(MINIMAL_TEXT)


@pytest.fixture(scope="session")
def small_instances():
    """A spread of small synthetic instances (uniform and clustered)."""
    out = [generate_instance(10 + (s % 3) * 4, 3 + s % 2, seed=s, clustered=bool(s % 2)) for s in range(8)]
    return out


def require_benchmark(name: str) -> Path:
    path = benchmark_file(name)
    if path is None:
        pytest.skip(f"benchmark file {name}.evrp not available (set EVRP_BENCHMARK_DIR)")
    return path
