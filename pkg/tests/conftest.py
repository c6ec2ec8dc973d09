# tests/conftest.py
import sys
from pathlib import Path

import numpy as np
import pytest

# Repository root: one level above tests/
ROOT = Path(__file__).resolve().parents[1]
PACKAGES_DIR = ROOT / "packages"

# Put packages/ and the repo root (for tools/) at the front of sys.path
sys.path.insert(0, str(PACKAGES_DIR))
sys.path.insert(0, str(ROOT))

from chaos_mobility.dynsys import IntegratorConfig  # noqa: E402
from chaos_mobility.dynsys import integrate  # noqa: E402
from chaos_mobility.dynsys import make_system  # noqa: E402
from chaos_mobility.section import SectionComponent  # noqa: E402
from chaos_mobility.section import calibrate_components  # noqa: E402


class DummyMetrics:
    """Duck-typed metrics sink recording every increment."""

    def __init__(self) -> None:
        self.calls: list[tuple[str, float, dict]] = []

    def increment(self, name: str, amount: float = 1.0, **labels) -> None:
        self.calls.append((name, float(amount), dict(labels)))

    def total(self, name: str, **labels) -> float:
        return sum(
            amount
            for n, amount, got in self.calls
            if n == name and all(got.get(k) == v for k, v in labels.items())
        )


@pytest.fixture
def metrics() -> DummyMetrics:
    return DummyMetrics()


@pytest.fixture(scope="session")
def rossler():
    return make_system("rossler")


@pytest.fixture(scope="session")
def lorenz():
    return make_system("lorenz")


@pytest.fixture(scope="session")
def rossler_traj(rossler):
    # ~100 flow periods after the transient
    cfg = IntegratorConfig(dt=0.01, steps=60_000, transient_steps=10_000)
    return integrate(rossler, [1.0, 1.0, 0.0], cfg)


@pytest.fixture(scope="session")
def rossler_component(rossler, rossler_traj):
    comp = SectionComponent(id="P", index=1, coord=0, level=0.0, direction=1, norm_coord=1)
    return calibrate_components(rossler_traj, [comp], system=rossler)[0]


def lorenz_components() -> list[SectionComponent]:
    return [
        SectionComponent("A", 1, 0, 0.0, 1, "initial", 1),
        SectionComponent("B", 2, 0, 10.0, -1, "transitional", 1),
        SectionComponent("C", 3, 0, 0.0, -1, "final", 1),
    ]


@pytest.fixture(scope="session")
def lorenz_traj(lorenz):
    cfg = IntegratorConfig(dt=0.005, steps=100_000, transient_steps=4_000)
    return integrate(lorenz, [1.0, 1.0, 20.0], cfg)


@pytest.fixture(scope="session")
def lorenz_calibrated(lorenz, lorenz_traj):
    return calibrate_components(lorenz_traj, lorenz_components(), system=lorenz)


@pytest.fixture(scope="session")
def lorenz_reference(lorenz, lorenz_traj):
    return np.array(lorenz_traj.final_state)
