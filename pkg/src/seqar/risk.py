"""Monte Carlo risk evaluation and diagnostic moment checks.

Risks are squared distances between the selected (or any fixed-weight)
estimator and the true coefficient: the continuous norm integrates the
piecewise-constant extension against the truth cell by cell, and the
empirical norm averages squared errors over the grid.  Replications that
fail the all-points threshold event contribute the norm of the truth
itself, matching the zero estimator returned there.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import simpson

from .process import ModelSpec, NoiseDensity, StabilityParams, moment_cap, simulate_path
from .selection import Basis, FourierEstimates, build_basis, family_matrix, fourier_estimates
from .seqkernel import (GridLayout, RegressionData, build_regression, eta_variables,
                        grid_layout, sigma_band)
from .weights import WeightGridParams, build_weight_family

ETA_FOURTH_POWER_FACTOR = 4.0 * (144.0 / math.sqrt(3.0)) ** 4


def eta_fourth_moment_cap(varsigma: float) -> float:
    """Bound on E eta^4 / sigma^4 for the always-defined noise variables."""
    return ETA_FOURTH_POWER_FACTOR * moment_cap(varsigma, 4)


def oracle_bound_factor(delta: float) -> float:
    """Leading factor (1+4d)(1+d)^2 / (1-6d) of the oracle inequality."""
    return (1.0 + 4.0 * delta) * (1.0 + delta) ** 2 / (1.0 - 6.0 * delta)


@dataclass(frozen=True)
class ProcedureParams:
    """Tunable knobs of the full pipeline."""

    mu0: float = 0.5
    delta: float = 1.0 / 12.0
    k_star0: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.mu0 < 1.0:
            raise ValueError("mu0 must lie in (0, 1)")
        if not 0.0 < self.delta <= 1.0 / 12.0:
            raise ValueError("delta must lie in (0, 1/12]")
        if self.k_star0 < 0:
            raise ValueError("k_star0 must be >= 0")


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def empirical_norm_sq(f_on_grid: np.ndarray, a: float, b: float) -> float:
    """((b-a)/d) sum of squares over the grid."""
    f = np.asarray(f_on_grid, dtype=np.float64)
    if f.size == 0:
        raise ValueError("empty grid vector")
    return float((b - a) / f.shape[0] * np.sum(f ** 2))


def l2_norm_sq(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
               quad_points: int = 100_000) -> float:
    """Composite-quadrature approximation of the integral of f^2 over [a, b]."""
    if quad_points < 1_000:
        raise ValueError("quad_points must be >= 1000")
    x = np.linspace(a, b, quad_points)
    vals = np.asarray(f(x), dtype=np.float64)
    return float(simpson(vals ** 2, x=x))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def cell_integrals(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                   d: int) -> tuple[float, np.ndarray, np.ndarray]:
    """Per-cell width, integral of f, and integral of f^2 on the d grid cells."""
    width = (b - a) / d
    left = a + width * np.arange(d)
    # map 16-point Gauss-Legendre nodes into every cell at once
    x = left[:, None] + (0.5 * width) * (_GL_NODES[None, :] + 1.0)
    w = 0.5 * width * _GL_WEIGHTS
    vals = np.asarray(f(x), dtype=np.float64)
    i1 = vals @ w
    i2 = (vals ** 2) @ w
    return width, i1, i2


def piecewise_risk_sq(values_on_grid: np.ndarray, cell_width: float,
                      i1: np.ndarray, i2: np.ndarray) -> float:
    """Exact integral of (g - f)^2 for cellwise-constant g against cell data of f."""
    c = np.asarray(values_on_grid, dtype=np.float64)
    return float(cell_width * np.sum(c ** 2) - 2.0 * np.sum(c * i1) + np.sum(i2))


# ---------------------------------------------------------------------------
# Monte Carlo risk
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RiskPipeline:
    """Precomputed layout/basis/weights for repeated replications."""

    spec: ModelSpec
    stability: StabilityParams
    proc: ProcedureParams
    layout: GridLayout
    basis: Basis
    family: tuple
    lmat: np.ndarray
    cell_width: float
    cell_i1: np.ndarray
    cell_i2: np.ndarray
    truth_on_grid: np.ndarray

    @property
    def nu(self) -> int:
        return self.lmat.shape[0]


def build_pipeline(spec: ModelSpec, stability: StabilityParams,
                   proc: ProcedureParams,
                   family: Optional[Sequence] = None) -> RiskPipeline:
    layout = grid_layout(spec, proc.mu0)
    basis = build_basis(layout.d, spec.a, spec.b)
    if family is None:
        family = build_weight_family(
            WeightGridParams(k_star0=proc.k_star0, n=spec.n, d=layout.d))
    family = tuple(family)
    lmat = family_matrix(family, layout.d)
    width, i1, i2 = cell_integrals(spec.S, spec.a, spec.b, layout.d)
    truth = np.asarray(spec.S(layout.z), dtype=np.float64)
    return RiskPipeline(spec=spec, stability=stability, proc=proc, layout=layout,
                        basis=basis, family=family, lmat=lmat, cell_width=width,
                        cell_i1=i1, cell_i2=i2, truth_on_grid=truth)


@dataclass
class ReplicationRows:
    """Per-replication outcomes, ordered by the seed list."""

    seeds: np.ndarray
    gamma: np.ndarray
    lambda_risk: np.ndarray
    lambda_risk_emp: np.ndarray
    selected_index: np.ndarray

    def merged_with(self, other: "ReplicationRows") -> "ReplicationRows":
        return ReplicationRows(
            seeds=np.concatenate([self.seeds, other.seeds]),
            gamma=np.concatenate([self.gamma, other.gamma]),
            lambda_risk=np.vstack([self.lambda_risk, other.lambda_risk]),
            lambda_risk_emp=np.vstack([self.lambda_risk_emp, other.lambda_risk_emp]),
            selected_index=np.concatenate([self.selected_index, other.selected_index]),
        )


def run_replications(pipe: RiskPipeline, seeds: Sequence[int]) -> ReplicationRows:
    """Simulate, estimate, and score every fixed-weight estimator per seed."""
    nreps = len(seeds)
    nu = pipe.nu
    d = pipe.layout.d
    scale = (pipe.spec.b - pipe.spec.a) / d
    gamma = np.zeros(nreps, dtype=np.bool_)
    lambda_risk = np.empty((nreps, nu))
    lambda_risk_emp = np.empty((nreps, nu))
    selected = np.empty(nreps, dtype=np.int64)
    sq_lmat = pipe.lmat ** 2
    for r, seed in enumerate(seeds):
        path = simulate_path(pipe.spec, seed, record_noise=False)
        data = build_regression(path, pipe.layout, pipe.stability)
        fe = fourier_estimates(data, pipe.basis)
        costs = (sq_lmat @ (fe.theta_hat ** 2)
                 - 2.0 * (pipe.lmat @ fe.theta_tilde)
                 + pipe.proc.delta * scale * (sq_lmat @ fe.s))
        idx = int(np.argmin(costs))
        if data.gamma_all:
            grids = (pipe.lmat * fe.theta_hat) @ pipe.basis.values
        else:
            grids = np.zeros((nu, d))
        lambda_risk[r] = (pipe.cell_width * np.sum(grids ** 2, axis=1)
                          - 2.0 * (grids @ pipe.cell_i1) + np.sum(pipe.cell_i2))
        diffs = grids - pipe.truth_on_grid
        lambda_risk_emp[r] = scale * np.sum(diffs ** 2, axis=1)
        gamma[r] = data.gamma_all
        selected[r] = idx
    return ReplicationRows(seeds=np.asarray(list(seeds), dtype=np.int64),
                           gamma=gamma, lambda_risk=lambda_risk,
                           lambda_risk_emp=lambda_risk_emp, selected_index=selected)


@dataclass
class RiskReport:
    """Monte Carlo risk summary for the weight family and the selected rule."""

    per_lambda_risk: np.ndarray
    selected_risk: float
    oracle_risk: float
    oracle_ratio: float
    replications: int
    std_errors: np.ndarray
    gamma_c_frequency: float
    selected_std_error: float
    per_lambda_risk_emp: np.ndarray
    selected_risk_emp: float
    rows: Optional[ReplicationRows] = None


def _se(x: np.ndarray) -> float:
    n = x.shape[0]
    if n < 2:
        return float("nan")
    return float(np.std(x, ddof=1) / math.sqrt(n))


def summarize(rows: ReplicationRows, keep_rows: bool = True) -> RiskReport:
    nreps = rows.seeds.shape[0]
    per_lambda = rows.lambda_risk.mean(axis=0)
    sel_risks = rows.lambda_risk[np.arange(nreps), rows.selected_index]
    sel_risks_emp = rows.lambda_risk_emp[np.arange(nreps), rows.selected_index]
    selected = float(sel_risks.mean())
    oracle = float(per_lambda.min())
    if oracle > 0:
        ratio = selected / oracle
    else:
        ratio = 1.0 if selected == 0 else float("inf")
    std_errors = (rows.lambda_risk.std(axis=0, ddof=1) / math.sqrt(nreps)
                  if nreps >= 2 else np.full(per_lambda.shape, np.nan))
    return RiskReport(
        per_lambda_risk=per_lambda,
        selected_risk=selected,
        oracle_risk=oracle,
        oracle_ratio=float(ratio),
        replications=nreps,
        std_errors=std_errors,
        gamma_c_frequency=float(1.0 - rows.gamma.mean()),
        selected_std_error=_se(sel_risks),
        per_lambda_risk_emp=rows.lambda_risk_emp.mean(axis=0),
        selected_risk_emp=float(sel_risks_emp.mean()),
        rows=rows if keep_rows else None,
    )


def make_seeds(base_seed: int, replications: int) -> list[int]:
    return [base_seed + r for r in range(replications)]


def monte_carlo_risk(spec: ModelSpec, stability: StabilityParams,
                     proc: ProcedureParams, replications: int,
                     base_seed: int = 0, seeds: Optional[Sequence[int]] = None,
                     keep_rows: bool = True,
                     family: Optional[Sequence] = None) -> RiskReport:
    """End-to-end Monte Carlo risk evaluation for one model instance."""
    if replications < 1:
        raise ValueError("need at least one replication")
    if seeds is None:
        seeds = make_seeds(base_seed, replications)
    elif len(seeds) != replications:
        raise ValueError("len(seeds) must equal replications")
    pipe = build_pipeline(spec, stability, proc, family=family)
    return summarize(run_replications(pipe, seeds), keep_rows=keep_rows)


@dataclass
class RobustRiskReport:
    """Worst-case risks over a finite noise-density set."""

    densities: tuple[str, ...]
    per_lambda_risk: np.ndarray
    selected_risk: float
    oracle_risk: float
    oracle_ratio: float
    member_reports: dict


def robust_risk(spec: ModelSpec, densities: Sequence[NoiseDensity],
                stability: StabilityParams, proc: ProcedureParams,
                replications: int, base_seed: int = 0,
                keep_rows: bool = False,
                family: Optional[Sequence] = None) -> RobustRiskReport:
    """Componentwise maximum of the per-density Monte Carlo risks."""
    if len(densities) == 0:
        raise ValueError("density set must be nonempty")
    members = {}
    for dens in densities:
        member_spec = ModelSpec(a=spec.a, b=spec.b, n=spec.n, S=spec.S,
                                noise=dens, y0=spec.y0)
        members[dens.kind] = monte_carlo_risk(member_spec, stability, proc,
                                              replications, base_seed=base_seed,
                                              keep_rows=keep_rows, family=family)
    per_lambda = np.max(np.vstack([m.per_lambda_risk for m in members.values()]), axis=0)
    selected = max(m.selected_risk for m in members.values())
    oracle = float(per_lambda.min())
    if oracle > 0:
        ratio = selected / oracle
    else:
        ratio = 1.0 if selected == 0 else float("inf")
    return RobustRiskReport(densities=tuple(members), per_lambda_risk=per_lambda,
                            selected_risk=float(selected), oracle_risk=oracle,
                            oracle_ratio=float(ratio), member_reports=members)


# ---------------------------------------------------------------------------
# diagnostics (need the true coefficient and the driving noise)
# ---------------------------------------------------------------------------


def decompose_noise(path, layout: GridLayout, data: RegressionData) -> dict:
    """Split per-point estimation error into main noise and two bias terms.

    Only defined at points that reached their threshold early (NaN
    elsewhere).  When every point succeeded, the response decomposition
    Y_l - S(z_l) = xi_star_l + varpi1_l + varpi2_l is verified to 1e-9.
    """
    xi = path.require_noise()
    spec = path.spec
    y = path.y
    svals = spec.coefficient_values()
    truth = np.asarray(spec.S(layout.z), dtype=np.float64)
    d = layout.d
    xi_star = np.full(d, np.nan)
    varpi1 = np.full(d, np.nan)
    varpi2 = np.full(d, np.nan)
    for p in data.point_results:
        if not p.gamma_ok:
            continue
        li = p.l - 1
        io, tau, h, kap = p.iota, p.tau, p.H, p.kappa
        js = np.arange(io + 1, tau)  # head of the window, j = iota+1 .. tau-1
        yprev = y[js - 1]
        shead = svals[js - 1] - truth[li]
        stau = svals[tau - 1] - truth[li]
        xi_star[li] = (np.sum(yprev * xi[js - 1]) + kap * y[tau - 1] * xi[tau - 1]) / h
        varpi1[li] = (np.sum(yprev ** 2 * shead) + kap ** 2 * y[tau - 1] ** 2 * stau) / h
        varpi2[li] = (kap - kap ** 2) * y[tau - 1] ** 2 * svals[tau - 1] / h
    if data.gamma_all:
        resid = data.Y - truth - xi_star - varpi1 - varpi2
        worst = float(np.max(np.abs(resid)))
        if worst > 1e-9:
            raise AssertionError(f"response decomposition residual {worst:.3e} > 1e-9")
        u_d = empirical_norm_sq(varpi1 + varpi2, layout.a, layout.b)
    else:
        u_d = 0.0
    return {"xi_star": xi_star, "varpi1": varpi1, "varpi2": varpi2, "u_d": u_d}


def _eta_fourier(pipe: RiskPipeline, seed: int):
    path = simulate_path(pipe.spec, seed, record_noise=True)
    data = build_regression(path, pipe.layout, pipe.stability)
    ev = eta_variables(path, pipe.layout)
    scale = (pipe.spec.b - pipe.spec.a) / pipe.layout.d
    eta_jd = math.sqrt(scale) * (pipe.basis.values @ ev.eta)
    s_jd = scale * ((pipe.basis.values ** 2) @ ev.sigma2)
    return data, eta_jd, s_jd


def check_prop4(spec: ModelSpec, stability: StabilityParams, proc: ProcedureParams,
                lam: np.ndarray, replications: int, base_seed: int = 0) -> dict:
    """Second-moment bound on the weighted centered squares of eta_{j,d}.

    lhs: Monte Carlo mean of 1_Gamma * B(lam)^2 with
    B = ((b-a)/sqrt(d)) sum_j lam_j (eta_{j,d}^2 - s_{j,d});
    rhs: 10 (b-a) sigma1 mcheck * mean penalty.
    """
    pipe = build_pipeline(spec, stability, proc)
    lam = np.asarray(lam, dtype=np.float64)
    d = pipe.layout.d
    if lam.shape != (d,):
        raise ValueError(f"lam must have shape ({d},)")
    width = spec.b - spec.a
    scale = width / d
    b_sq = np.empty(replications)
    pens = np.empty(replications)
    for r in range(replications):
        data, eta_jd, s_jd = _eta_fourier(pipe, base_seed + r)
        bval = (width / math.sqrt(d)) * np.sum(lam * (eta_jd ** 2 - s_jd))
        b_sq[r] = bval ** 2 if data.gamma_all else 0.0
        pens[r] = scale * np.sum(lam ** 2 * s_jd)
    _, sigma1 = _sigma_band_of(pipe)
    mcheck = eta_fourth_moment_cap(spec.noise.varsigma)
    lhs = float(b_sq.mean())
    rhs = float(10.0 * width * sigma1 * mcheck * pens.mean())
    return {"lhs": lhs, "rhs": rhs, "holds": lhs <= rhs, "lhs_se": _se(b_sq)}


def check_prop5(spec: ModelSpec, stability: StabilityParams, proc: ProcedureParams,
                v: np.ndarray, replications: int, base_seed: int = 0) -> dict:
    """Variance bound: E (sum_j v_j eta_{j,d})^2 <= sigma1 * |v|^2 (3-SE slack)."""
    pipe = build_pipeline(spec, stability, proc)
    v = np.asarray(v, dtype=np.float64)
    d = pipe.layout.d
    if v.shape != (d,):
        raise ValueError(f"v must have shape ({d},)")
    sq = np.empty(replications)
    for r in range(replications):
        _, eta_jd, _ = _eta_fourier(pipe, base_seed + r)
        sq[r] = np.sum(v * eta_jd) ** 2
    _, sigma1 = _sigma_band_of(pipe)
    lhs = float(sq.mean())
    se = _se(sq)
    rhs = float(sigma1 * np.sum(v ** 2))
    holds = lhs <= rhs + (3.0 * se if math.isfinite(se) else 0.0)
    return {"lhs": lhs, "rhs": rhs, "holds": holds, "lhs_se": se}


def _sigma_band_of(pipe: RiskPipeline) -> tuple[float, float]:
    return sigma_band(pipe.layout, pipe.stability)


def check_norm_lemma(f: Callable[[np.ndarray], np.ndarray], g_on_grid: np.ndarray,
                     eps_tilde: float, a: float, b: float,
                     fprime: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> dict:
    """Two-sided comparison of continuous and grid norms of f minus a step function.

    Checks ||D||^2 <= (1+e)||D||_d^2 + (1+1/e)(b-a)^2 ||f'||^2 / d^2 and the
    mirrored inequality, for D = f - g with g constant on the grid cells.
    """
    if eps_tilde <= 0:
        raise ValueError("eps_tilde must be positive")
    g = np.asarray(g_on_grid, dtype=np.float64)
    d = g.shape[0]
    width, i1, i2 = cell_integrals(f, a, b, d)
    norm_sq = piecewise_risk_sq(g, width, i1, i2)
    ls = np.arange(1, d + 1, dtype=np.float64)
    z = a + ls * (b - a) / d
    norm_sq_d = empirical_norm_sq(np.asarray(f(z), dtype=np.float64) - g, a, b)
    if fprime is not None:
        fdot_sq = l2_norm_sq(fprime, a, b)
    else:
        x = np.linspace(a, b, 200_001)
        fd = np.gradient(np.asarray(f(x), dtype=np.float64), x)
        fdot_sq = float(simpson(fd ** 2, x=x))
    extra = (1.0 + 1.0 / eps_tilde) * (b - a) ** 2 * fdot_sq / d ** 2
    bound1 = (1.0 + eps_tilde) * norm_sq_d + extra
    bound2 = (1.0 + eps_tilde) * norm_sq + extra
    holds1 = norm_sq <= bound1
    holds2 = norm_sq_d <= bound2
    return {"holds_both": holds1 and holds2, "holds_continuous": holds1,
            "holds_empirical": holds2, "norm_sq": norm_sq, "norm_sq_d": norm_sq_d,
            "bound1": bound1, "bound2": bound2, "fdot_norm_sq": fdot_sq}
