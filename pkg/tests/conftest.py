import numpy as np
import pytest

from latentpanel import Panel


def random_panel(rng, n=None, t=None, t0=None, staggered=False):
    """Admissible random panel with optional staggered adoption."""
    n = n if n is not None else int(rng.integers(4, 12))
    t = t if t is not None else int(rng.integers(3, 8))
    t0 = t0 if t0 is not None else int(rng.integers(1, t))
    outcomes = rng.normal(size=(n, t))
    treatment = np.zeros((n, t), dtype=np.int8)
    post = t - t0
    if post > 0:
        for i in range(n):
            if rng.uniform() < 0.5:
                adopt = t0 + 1 + int(rng.integers(0, post)) if staggered else t
                treatment[i, adopt - 1 :] = 1
    # keep both groups nonempty in the last period
    if treatment[:, -1].sum() == 0:
        treatment[0, -1] = 1
    if treatment[:, -1].sum() == n:
        treatment[-1, :] = 0
    return Panel(outcomes, treatment, t0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
