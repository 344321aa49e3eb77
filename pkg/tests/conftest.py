import numpy as np
import pytest

from fracstick.graphfn import smoothstep


def random_smooth_graph(seed):
    """Smooth compact-support 1-D test graph: 3 low-frequency modes, windowed."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(-0.12, 0.12, 3)
    b = rng.uniform(-0.12, 0.12, 3)
    ph = rng.uniform(0, 2 * np.pi, 3)

    def fn(q):
        x = q[:, 0]
        val = sum(
            a[k] * np.sin((k + 1) * np.pi * x / 1.6 + ph[k])
            + b[k] * np.cos((k + 1) * np.pi * x / 1.4)
            for k in range(3)
        )
        return val * (1.0 - smoothstep((np.abs(x) - 1.8) / 0.8))

    return fn


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
