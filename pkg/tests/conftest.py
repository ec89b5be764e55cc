import numpy as np
import pytest

from fleetbayes import ChainConfig, simulate_fleet
from fleetbayes.dataset import SyntheticScenario
from fleetbayes.hazard import HazardModel
from fleetbayes.splines import make_basis

QUICK_CHAINS = ChainConfig(n_chains=2, burn_in=300, n_samples=400, seed=17)


def small_truck_scenario(seed=0, sizes=(80, 50, 12, 5), noise_std=0.15):
    """Compact truck fleet: two rich tasks, two sparse short-window ones."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    K = len(sizes)
    alpha = np.column_stack([
        rng.normal(0.0, 0.25, size=K),
        rng.normal(1.5, 0.15, size=K),
    ])
    basis = make_basis(0.0, 1.0, 5)
    x_ranges = tuple((0.0, 1.0) if t < 2 else (0.0, 0.45) for t in range(K))
    return SyntheticScenario(
        family="truck_hazard",
        K_per_l=(K,),
        n_per_task=tuple(sizes),
        noise_std=noise_std,
        seed=seed,
        x_ranges=x_ranges,
        alpha=alpha,
        beta=np.array([[0.9, -0.9, 1.1, -0.8, 0.9]]),
        basis=basis,
    )


@pytest.fixture(scope="session")
def small_truck():
    scenario = small_truck_scenario()
    dataset = simulate_fleet(scenario)
    model = HazardModel(K_per_l=scenario.K_per_l, basis=scenario.basis)
    return scenario, dataset, model


@pytest.fixture(scope="session")
def small_truck_fit(small_truck):
    scenario, dataset, model = small_truck
    samples = model.fit(dataset, QUICK_CHAINS)
    return scenario, dataset, model, samples
