"""Two-stage sequential pointwise procedure on the evaluation grid.

Stage one estimates the coefficient at each grid point from the first few
window observations (pilot), projects it away from +-1, and converts it
into an information threshold H.  Stage two accumulates observed
information until H is crossed, with a fractional correction on the last
observation so the accumulated information equals H exactly.  A grid
point "succeeds" when the threshold is reached strictly before the
window's last observation; the regression responses are zeroed unless
every point succeeds.
"""

import csv
import math
from dataclasses import dataclass
from typing import IO, NamedTuple, Optional

import numpy as np

from .kernels import eta_all_points, scan_all_points
from .process import ModelSpec, Path, StabilityParams


@dataclass(frozen=True)
class GridLayout:
    """Evaluation grid, bandwidth, and per-point window indices."""

    a: float
    b: float
    n: int
    d: int
    mu0: float
    q: int
    h: float
    h_tilde: float
    eps_tilde: float
    z: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    iota: np.ndarray

    def window_indices(self, l: int) -> tuple[int, int, int]:
        """(k1, k2, iota) for grid index l in 1..d."""
        self._check_index(l)
        return int(self.k1[l - 1]), int(self.k2[l - 1]), int(self.iota[l - 1])

    def _check_index(self, l: int) -> None:
        if not 1 <= l <= self.d:
            raise IndexError(f"grid index {l} outside 1..{self.d}")


def grid_layout(spec: ModelSpec, mu0: float = 0.5) -> GridLayout:
    """Build the evaluation grid for one model instance.

    Raises when n is too small for a nonempty pilot or when any window
    would leave no post-pilot observations (the threshold would be <= 0).
    """
    if not 0.0 < mu0 < 1.0:
        raise ValueError("mu0 must lie in (0, 1)")
    n = spec.n
    if n < 9:
        raise ValueError("need n >= 9 so the grid has at least 3 points")
    d = math.isqrt(n)
    a, b = spec.a, spec.b
    h = (b - a) / (2 * d)
    h_tilde = 1.0 / (2 * d)
    q = int((n * h_tilde) ** mu0)
    if q < 1:
        raise ValueError(f"n={n} too small: pilot length would be {q}")
    ls = np.arange(1, d + 1, dtype=np.int64)
    # window bounds via exact integer arithmetic: n*z~_l -+ n*h~ = n(2l -+ 1)/(2d)
    k1 = (n * (2 * ls - 1)) // (2 * d) + 1
    k2 = np.minimum((n * (2 * ls + 1)) // (2 * d), n)
    iota = k1 + q
    m = k2 - iota - 1
    if int(m.min()) < 1:
        bad = int(ls[int(np.argmin(m))])
        raise ValueError(
            f"n={n} too small: window at grid point {bad} has no post-pilot "
            f"observations (needs k2 - iota - 1 >= 1)")
    z = a + ls * (b - a) / d
    eps_tilde = 1.0 / (2.0 + math.log(n))
    return GridLayout(a=a, b=b, n=n, d=d, mu0=mu0, q=q, h=h, h_tilde=h_tilde,
                      eps_tilde=eps_tilde, z=z, k1=k1, k2=k2, iota=iota)


class PilotEstimate(NamedTuple):
    pilot: float
    pilot_proj: float
    degenerate: bool


@dataclass(frozen=True)
class PointProcedureResult:
    """Output of the sequential procedure at a single grid point."""

    l: int
    k1: int
    k2: int
    iota: int
    pilot: float
    pilot_proj: float
    gamma_tilde: float
    H: float
    tau: int
    kappa: float
    estimate: float
    gamma_ok: bool
    sigma2: float
    degenerate: bool = False


@dataclass(frozen=True)
class RegressionData:
    """Per-grid-point responses and variances for the selection stage."""

    a: float
    b: float
    z: np.ndarray
    Y: np.ndarray
    sigma2: np.ndarray
    gamma_all: bool
    sigma_bounds: tuple[float, float]
    point_results: tuple[PointProcedureResult, ...]

    @property
    def d(self) -> int:
        return self.z.shape[0]


class EtaVariables(NamedTuple):
    eta: np.ndarray
    sigma2: np.ndarray
    tau_check: np.ndarray
    kappa_check: np.ndarray


def _check_path(path: Path, layout: GridLayout) -> None:
    if path.y.shape[0] != layout.n + 1:
        raise ValueError("path length does not match layout")


def _scan(path: Path, layout: GridLayout, sel: Optional[slice] = None):
    sel = sel if sel is not None else slice(None)
    return scan_all_points(path.y, layout.k1[sel], layout.k2[sel],
                           layout.iota[sel], layout.eps_tilde)


def pilot_estimate(path: Path, layout: GridLayout, l: int) -> PilotEstimate:
    """Pilot ratio estimator at grid point l and its projection away from +-1.

    A zero pilot denominator is flagged degenerate and yields pilot = 0.
    """
    _check_path(path, layout)
    layout._check_index(l)
    pilot, proj, _, _, _, _, _, _, degen = _scan(path, layout, slice(l - 1, l))
    return PilotEstimate(float(pilot[0]), float(proj[0]), bool(degen[0]))


def project_pilot(pilot: float, eps_tilde: float) -> float:
    """Clamp a pilot value into [-1 + eps_tilde, 1 - eps_tilde]."""
    return min(max(pilot, -1.0 + eps_tilde), 1.0 - eps_tilde)


def threshold(layout: GridLayout, l: int, pilot_proj: float) -> float:
    """Information threshold H_l = (1 - eps~) (k2 - iota - 1) / (1 - proj^2)."""
    k1, k2, iota = layout.window_indices(l)
    if abs(pilot_proj) > 1.0 - layout.eps_tilde:
        raise ValueError("pilot_proj must already be projected into the admissible band")
    gamma_tilde = 1.0 - pilot_proj * pilot_proj
    return (1.0 - layout.eps_tilde) * (k2 - iota - 1) / gamma_tilde


def run_point_procedure(path: Path, layout: GridLayout, l: int) -> PointProcedureResult:
    """Full pilot/threshold/stopping procedure at a single grid point."""
    _check_path(path, layout)
    layout._check_index(l)
    res = _scan(path, layout, slice(l - 1, l))
    return _point_result(layout, l, res, 0)


def _point_result(layout: GridLayout, l: int, arrays, i: int) -> PointProcedureResult:
    pilot, proj, gtil, H, tau, kappa, estimate, gamma_ok, degen = arrays
    k1, k2, iota = layout.window_indices(l)
    return PointProcedureResult(
        l=l, k1=k1, k2=k2, iota=iota,
        pilot=float(pilot[i]), pilot_proj=float(proj[i]),
        gamma_tilde=float(gtil[i]), H=float(H[i]), tau=int(tau[i]),
        kappa=float(kappa[i]), estimate=float(estimate[i]),
        gamma_ok=bool(gamma_ok[i]), sigma2=1.0 / float(H[i]),
        degenerate=bool(degen[i]))


def sigma_band(layout: GridLayout, stability: StabilityParams) -> tuple[float, float]:
    """Deterministic variance band (sigma0, sigma1) implied by the layout."""
    nh = layout.n * layout.h_tilde
    eps_t = layout.eps_tilde
    sigma0 = (1.0 - stability.eps ** 2) / (2.0 * (1.0 - eps_t) * nh)
    sigma1 = 1.0 / ((1.0 - eps_t) * (2.0 * nh - layout.q - 3))
    return sigma0, sigma1


def build_regression(path: Path, layout: GridLayout,
                     stability: StabilityParams) -> RegressionData:
    """Run the procedure at every grid point and assemble the responses.

    Responses are the per-point estimates when every point succeeded and
    all zeros otherwise.
    """
    _check_path(path, layout)
    arrays = _scan(path, layout)
    pilot, proj, gtil, H, tau, kappa, estimate, gamma_ok, degen = arrays
    gamma_all = bool(np.all(gamma_ok))
    Y = estimate.copy() if gamma_all else np.zeros_like(estimate)
    sigma2 = 1.0 / H
    points = tuple(_point_result(layout, l, arrays, l - 1)
                   for l in range(1, layout.d + 1))
    return RegressionData(a=layout.a, b=layout.b, z=layout.z.copy(), Y=Y,
                          sigma2=sigma2, gamma_all=gamma_all,
                          sigma_bounds=sigma_band(layout, stability),
                          point_results=points)


def eta_variables(path: Path, layout: GridLayout) -> EtaVariables:
    """Always-defined noise variables (eta_l, sigma_l^2) per grid point.

    Diagnostic only: requires the path's driving-noise record.  The
    modified stopping time and correction are verified to agree with the
    observable ones at every point that reached its threshold early.
    """
    xi = path.require_noise()
    _check_path(path, layout)
    arrays = _scan(path, layout)
    _, _, _, H, tau, kappa, _, gamma_ok, _ = arrays
    eta, tau_chk, kappa_chk = eta_all_points(path.y, xi, layout.k1, layout.k2,
                                             layout.iota, H)
    ok = gamma_ok
    if not np.array_equal(tau_chk[ok], tau[ok]):
        raise AssertionError("modified stopping time disagrees on a successful point")
    if not np.array_equal(kappa_chk[ok], kappa[ok]):
        raise AssertionError("modified correction disagrees on a successful point")
    return EtaVariables(eta=eta, sigma2=1.0 / H, tau_check=tau_chk,
                        kappa_check=kappa_chk)


def upsilon_statistic(path: Path, m0: int, m1: int, gamma_l: float) -> float:
    """Centered window second moment: mean(y_j^2, j=m0+1..m1) - 1/gamma_l."""
    if not 0.0 < gamma_l <= 1.0:
        raise ValueError("gamma_l must lie in (0, 1]")
    n = path.y.shape[0] - 1
    if not (0 <= m0 < m1 <= n):
        raise ValueError(f"need 0 <= m0 < m1 <= {n}")
    seg = path.y[m0 + 1 : m1 + 1]
    return float(np.mean(seg ** 2) - 1.0 / gamma_l)


POINT_CSV_COLUMNS = ("l", "k1", "k2", "iota", "pilot", "pilot_proj", "H",
                     "tau", "kappa", "estimate", "gamma_ok", "sigma2")


def points_to_csv(points, out: IO[str]) -> None:
    """Dump per-point procedure results as CSV rows."""
    w = csv.writer(out)
    w.writerow(POINT_CSV_COLUMNS)
    for p in points:
        w.writerow([p.l, p.k1, p.k2, p.iota, repr(p.pilot), repr(p.pilot_proj),
                    repr(p.H), p.tau, repr(p.kappa), repr(p.estimate),
                    int(p.gamma_ok), repr(p.sigma2)])
