"""Varying-coefficient AR(1) simulation and the admissible noise family.

The process is y_k = S(x_k) * y_{k-1} + xi_k on the design grid
x_k = a + k(b-a)/n, driven by i.i.d. unit-variance zero-mean noise.
Shipped noise densities (standard Gaussian, uniform on [-sqrt(3), sqrt(3)],
Rademacher) all satisfy the even-moment cap E|xi|^(2k) <= vs^k (2k-1)!!
with vs = 1.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .kernels import ar1_path

NOISE_KINDS = ("gaussian", "uniform", "rademacher")

_UNIFORM_HALF_WIDTH = math.sqrt(3.0)


def _double_factorial_odd(order: int) -> int:
    # (order-1)!! for even order: 1*3*5*...*(order-1)
    out = 1
    for k in range(1, order, 2):
        out *= k
    return out


@dataclass(frozen=True)
class NoiseDensity:
    """One member of the admissible noise family.

    ``varsigma`` is the family's moment-cap parameter; it does not change
    the sampling distribution of the shipped kinds (all have variance 1).
    """

    kind: str
    varsigma: float = 1.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; choose from {NOISE_KINDS}")
        if self.varsigma < 1.0:
            raise ValueError("varsigma must be >= 1")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        if self.kind == "uniform":
            return rng.uniform(-_UNIFORM_HALF_WIDTH, _UNIFORM_HALF_WIDTH, size)
        return (2.0 * rng.integers(0, 2, size) - 1.0).astype(np.float64)


def noise_moment(noise: NoiseDensity, order: int) -> float:
    """Analytic absolute moment E|xi|^order for the shipped densities."""
    if order not in (2, 4, 6, 8, 10, 12):
        raise ValueError(f"unsupported moment order {order}; expected an even order <= 12")
    if noise.kind == "gaussian":
        return float(_double_factorial_odd(order))
    if noise.kind == "uniform":
        return 3.0 ** (order // 2) / (order + 1)
    return 1.0


def moment_cap(varsigma: float, order: int) -> float:
    """Family-wide cap vs^(order/2) * (order-1)!! on E|xi|^order."""
    if order % 2 != 0 or order <= 0:
        raise ValueError("order must be a positive even integer")
    return varsigma ** (order // 2) * _double_factorial_odd(order)


@dataclass(frozen=True)
class StabilityParams:
    """Stability-set parameters: sup|S| <= 1 - eps and sup|S'| <= L."""

    eps: float
    L: float

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        if self.L <= 0.0:
            raise ValueError("L must be positive")


@dataclass(frozen=True)
class ModelSpec:
    """One experiment instance: interval, sample size, coefficient, noise."""

    a: float
    b: float
    n: int
    S: Callable[[np.ndarray], np.ndarray]
    noise: NoiseDensity
    y0: float = 0.0

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("need a < b")
        if self.n < 3:
            raise ValueError("need n >= 3")

    def design_points(self) -> np.ndarray:
        """x_k = a + k(b-a)/n for k = 1..n."""
        k = np.arange(1, self.n + 1, dtype=np.float64)
        return self.a + k * (self.b - self.a) / self.n

    def coefficient_values(self) -> np.ndarray:
        return np.asarray(self.S(self.design_points()), dtype=np.float64)


@dataclass
class Path:
    """A realized trajectory y_0..y_n plus the seed that produced it.

    ``xi`` is the driving noise record; diagnostic operations that need the
    true noise refuse to run when it is absent.
    """

    y: np.ndarray
    seed: int
    spec: ModelSpec
    xi: Optional[np.ndarray] = field(default=None, repr=False)

    def require_noise(self) -> np.ndarray:
        if self.xi is None:
            raise ValueError("this operation needs the driving-noise record; "
                             "simulate with record_noise=True")
        return self.xi


def path_rng(seed: int) -> np.random.Generator:
    # counter-based generator: distinct keys give independent streams
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def simulate_path(spec: ModelSpec, seed: int, xi: Optional[np.ndarray] = None,
                  record_noise: bool = True) -> Path:
    """Simulate one trajectory; deterministic given (spec, seed).

    ``xi`` overrides the drawn noise (testing hook); it must have length n.
    """
    if xi is None:
        xi = spec.noise.draw(path_rng(seed), spec.n)
    else:
        xi = np.asarray(xi, dtype=np.float64)
        if xi.shape != (spec.n,):
            raise ValueError(f"noise override must have shape ({spec.n},)")
    svals = spec.coefficient_values()
    y = ar1_path(svals, xi, spec.y0)
    return Path(y=y, seed=seed, spec=spec, xi=xi if record_noise else None)


class StabilityReport(NamedTuple):
    in_theta: bool
    sup_S: float
    sup_dS: float


def check_stability(S: Callable[[np.ndarray], np.ndarray], params: StabilityParams,
                    grid_size: int = 10_000, a: float = 0.0, b: float = 1.0,
                    dS: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> StabilityReport:
    """Grid check of membership in the stability set over [a, b].

    The derivative is approximated by central differences unless an analytic
    ``dS`` is supplied.
    """
    if grid_size < 100:
        raise ValueError("grid_size must be >= 100")
    x = np.linspace(a, b, grid_size)
    vals = np.asarray(S(x), dtype=np.float64)
    sup_s = float(np.max(np.abs(vals)))
    if dS is not None:
        dvals = np.asarray(dS(x), dtype=np.float64)
    else:
        dvals = np.gradient(vals, x)
    sup_ds = float(np.max(np.abs(dvals)))
    in_theta = (sup_s <= 1.0 - params.eps) and (sup_ds <= params.L)
    return StabilityReport(in_theta, sup_s, sup_ds)


def max_path_moment(spec: ModelSpec, power: int, replications: int,
                    seeds: Optional[Sequence[int]] = None, base_seed: int = 0) -> float:
    """Monte Carlo estimate of E max_{1<=j<=n} y_j^power."""
    if power not in (2, 4):
        raise ValueError("power must be 2 or 4")
    if seeds is None:
        seeds = [base_seed + r for r in range(replications)]
    elif len(seeds) != replications:
        raise ValueError("len(seeds) must equal replications")
    acc = 0.0
    for s in seeds:
        path = simulate_path(spec, s, record_noise=False)
        acc += float(np.max(path.y[1:] ** power))
    return acc / replications


# ---------------------------------------------------------------------------
# coefficient-function catalog (names usable from config files)
# ---------------------------------------------------------------------------


def make_coefficient(name: str) -> Callable[[np.ndarray], np.ndarray]:
    """Build a coefficient function from a catalog name.

    Supported: ``zero``, ``const:c``, ``sine:amp,freq`` (amp*sin(2*pi*freq*x)).
    """
    name = name.strip()
    if name == "zero":
        return lambda x: np.zeros_like(np.asarray(x, dtype=np.float64))
    if name.startswith("const:"):
        c = float(name.split(":", 1)[1])
        return lambda x: np.full_like(np.asarray(x, dtype=np.float64), c)
    if name.startswith("sine:"):
        parts = name.split(":", 1)[1].split(",")
        if len(parts) != 2:
            raise ValueError(f"sine coefficient needs 'sine:amp,freq', got {name!r}")
        amp, freq = float(parts[0]), float(parts[1])
        return lambda x: amp * np.sin(2.0 * np.pi * freq * np.asarray(x, dtype=np.float64))
    raise ValueError(f"unknown coefficient function {name!r}")
