import numpy as np
import pytest

from seqar import ModelSpec, NoiseDensity, StabilityParams, make_coefficient, simulate_path


def sine_spec(n, noise="gaussian", amp=0.3):
    return ModelSpec(a=0.0, b=1.0, n=n, S=make_coefficient(f"sine:{amp},1"),
                     noise=NoiseDensity(noise))


def zero_spec(n, noise="gaussian", y0=0.0):
    return ModelSpec(a=0.0, b=1.0, n=n, S=make_coefficient("zero"),
                     noise=NoiseDensity(noise), y0=y0)


def const_spec(n, c, noise="gaussian", y0=0.0):
    return ModelSpec(a=0.0, b=1.0, n=n, S=make_coefficient(f"const:{c}"),
                     noise=NoiseDensity(noise), y0=y0)


def square_wave_targets(n):
    """Target trajectory 1, 1, -1, -1, 1, 1, ... starting from y_0 = 1."""
    k = np.arange(n + 1)
    return np.where(np.isin(k % 4, (0, 1)), 1.0, -1.0)


def forced_noise_for(spec, targets):
    """Noise stream that reproduces ``targets`` exactly under ``spec``.

    Only exact when the involved products are dyadic (e.g. S constant in
    {0, +-0.5} and targets in {+-1}), which all fixtures here satisfy.
    """
    svals = spec.coefficient_values()
    return targets[1:] - svals * targets[:-1]


@pytest.fixture(scope="session")
def square_path_n100():
    """Deterministic path at n=100 on which every grid point succeeds."""
    spec = zero_spec(100, noise="rademacher", y0=1.0)
    targets = square_wave_targets(100)
    path = simulate_path(spec, seed=0, xi=forced_noise_for(spec, targets))
    assert np.array_equal(path.y, targets)
    return path


@pytest.fixture(scope="session")
def square_path_const_n100():
    """Same square wave driven through S = 0.5 (nonzero bias terms)."""
    spec = const_spec(100, 0.5, noise="rademacher", y0=1.0)
    targets = square_wave_targets(100)
    path = simulate_path(spec, seed=0, xi=forced_noise_for(spec, targets))
    assert np.array_equal(path.y, targets)
    return path


STAB = StabilityParams(eps=0.1, L=2.0)
