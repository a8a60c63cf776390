"""Weighted least-squares estimation on the grid with penalized selection.

The basis is trigonometric and orthonormal for the empirical inner
product (f, g)_d = ((b-a)/d) sum_l f(z_l) g(z_l) on the uniform grid
z_l = a + l(b-a)/d.  Candidate estimators shrink the empirical Fourier
coefficients by weight vectors; the winner minimizes an unbiased-risk
style cost with a variance penalty.
"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .seqkernel import RegressionData

GRAM_TOL = 1e-10


@dataclass(frozen=True)
class Basis:
    """Precomputed basis values: ``values[j-1, l-1] = phi_j(z_l)``."""

    d: int
    a: float
    b: float
    values: np.ndarray

    @property
    def z(self) -> np.ndarray:
        ls = np.arange(1, self.d + 1, dtype=np.float64)
        return self.a + ls * (self.b - self.a) / self.d

    def gram_deviation(self) -> float:
        g = ((self.b - self.a) / self.d) * (self.values @ self.values.T)
        return float(np.max(np.abs(g - np.eye(self.d))))


def build_basis(d: int, a: float, b: float) -> Basis:
    """Trigonometric basis orthonormal for the empirical inner product.

    phi_1 is constant 1/sqrt(b-a); higher functions alternate cosine and
    sine at frequency floor(j/2).  For even d the top (Nyquist) cosine
    alternates signs on the grid and is rescaled to unit empirical norm.
    Construction fails loudly if the Gram matrix deviates from identity.
    """
    if d < 2:
        raise ValueError("need d >= 2")
    width = b - a
    ls = np.arange(1, d + 1, dtype=np.float64)
    l0 = ls / d
    values = np.empty((d, d))
    values[0] = 1.0 / math.sqrt(width)
    amp = math.sqrt(2.0 / width)
    for j in range(2, d + 1):
        freq = j // 2
        arg = 2.0 * np.pi * freq * l0
        values[j - 1] = amp * (np.cos(arg) if j % 2 == 0 else np.sin(arg))
    if d % 2 == 0:
        # Nyquist mode: sqrt(2) cos(pi d l0) = sqrt(2) (-1)^l has empirical
        # norm sqrt(2); store the unit-norm version instead.
        signs = np.where(np.arange(1, d + 1) % 2 == 0, 1.0, -1.0)
        values[d - 1] = signs / math.sqrt(width)
    basis = Basis(d=d, a=a, b=b, values=values)
    dev = basis.gram_deviation()
    if dev > GRAM_TOL:
        raise RuntimeError(f"basis Gram deviation {dev:.3e} exceeds {GRAM_TOL}")
    return basis


@dataclass(frozen=True)
class FourierEstimates:
    """Empirical Fourier data: coefficients, bias-corrected squares, variances."""

    theta_hat: np.ndarray
    theta_tilde: np.ndarray
    s: np.ndarray
    d: int


def fourier_estimates(data: RegressionData, basis: Basis) -> FourierEstimates:
    """Project responses on the basis and estimate coefficient variances."""
    if data.d != basis.d or data.a != basis.a or data.b != basis.b:
        raise ValueError("regression data and basis disagree on grid")
    scale = (basis.b - basis.a) / basis.d
    theta_hat = scale * (basis.values @ data.Y)
    s = scale * ((basis.values ** 2) @ data.sigma2)
    theta_tilde = theta_hat ** 2 - scale * s
    return FourierEstimates(theta_hat=theta_hat, theta_tilde=theta_tilde,
                            s=s, d=basis.d)


def _weight_array(lam, d: int) -> np.ndarray:
    vals = np.asarray(getattr(lam, "values", lam), dtype=np.float64)
    if vals.shape != (d,):
        raise ValueError(f"weight vector has shape {vals.shape}, expected ({d},)")
    return vals


def penalty(lam, fe: FourierEstimates, a: float, b: float) -> float:
    """Variance penalty ((b-a)/d) sum_j lam(j)^2 s_j."""
    vals = _weight_array(lam, fe.d)
    return float((b - a) / fe.d * np.sum(vals ** 2 * fe.s))


def cost(lam, fe: FourierEstimates, delta: float, a: float, b: float) -> float:
    """Selection cost: sum lam^2 theta_hat^2 - 2 sum lam theta_tilde + delta * penalty."""
    _check_delta(delta)
    vals = _weight_array(lam, fe.d)
    return float(np.sum(vals ** 2 * fe.theta_hat ** 2)
                 - 2.0 * np.sum(vals * fe.theta_tilde)
                 + delta * penalty(vals, fe, a, b))


def _check_delta(delta: float) -> None:
    if not 0.0 < delta <= 1.0 / 12.0:
        raise ValueError("delta must lie in (0, 1/12]")


@dataclass(frozen=True)
class SelectionResult:
    """Chosen weight vector, the cost table, and grid values of the estimator."""

    lambda_hat: np.ndarray
    lambda_index: int
    costs: np.ndarray
    estimates_on_grid: np.ndarray
    delta: float


def family_matrix(family: Sequence, d: int) -> np.ndarray:
    return np.vstack([_weight_array(lam, d) for lam in family])


def cost_table(fe: FourierEstimates, lmat: np.ndarray, delta: float,
               a: float, b: float) -> np.ndarray:
    """Costs for a stack of weight vectors (rows of ``lmat``)."""
    scale = (b - a) / fe.d
    return ((lmat ** 2) @ (fe.theta_hat ** 2)
            - 2.0 * (lmat @ fe.theta_tilde)
            + delta * scale * ((lmat ** 2) @ fe.s))


def grid_estimates(fe: FourierEstimates, basis: Basis, lam,
                   gamma: bool = True) -> np.ndarray:
    """Grid values of the shrunken estimator sum_j lam(j) theta_hat_j phi_j(z_l)."""
    vals = _weight_array(lam, fe.d)
    out = (vals * fe.theta_hat) @ basis.values
    if not gamma:
        out = np.zeros_like(out)
    return out


def select(fe: FourierEstimates, family: Sequence, delta: float,
           basis: Basis, gamma: bool = True) -> SelectionResult:
    """Minimize the cost over the weight family (ties: first index wins).

    ``gamma`` is the all-points-succeeded indicator from the regression
    stage; when it is false the returned estimator is identically zero.
    """
    _check_delta(delta)
    if len(family) == 0:
        raise ValueError("weight family is empty")
    lmat = family_matrix(family, fe.d)
    costs = cost_table(fe, lmat, delta, basis.a, basis.b)
    idx = int(np.argmin(costs))
    chosen = lmat[idx]
    est = grid_estimates(fe, basis, chosen, gamma=gamma)
    return SelectionResult(lambda_hat=chosen.copy(), lambda_index=idx,
                           costs=costs, estimates_on_grid=est, delta=delta)


def evaluate(result: SelectionResult, t: float, grid: np.ndarray) -> float:
    """Piecewise-constant extension: grid-cell value at t (cells right-closed)."""
    vals = result.estimates_on_grid
    return float(piecewise_values(vals, np.asarray([t]), grid)[0])


def piecewise_values(values_on_grid: np.ndarray, t: np.ndarray,
                     grid: np.ndarray) -> np.ndarray:
    """Vectorized piecewise-constant extension over the grid cells.

    The first cell [a, z_1] takes the value at z_1; cell (z_{l-1}, z_l]
    takes the value at z_l.
    """
    d = grid.shape[0]
    if d < 2:
        raise ValueError("need at least 2 grid points")
    a = grid[0] - (grid[1] - grid[0])
    b = grid[-1]
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < a) or np.any(t > b):
        raise ValueError(f"query point outside [{a}, {b}]")
    idx = np.searchsorted(grid, t, side="left")
    return values_on_grid[np.minimum(idx, d - 1)]
