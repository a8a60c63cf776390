"""Batch experiment driver.

Verbs: simulate | estimate | select | risk | oracle-check | diagnostics |
validate, each taking ``--config FILE`` plus optional ``--seed`` and
``--out`` overrides.  Artifacts are CSV for tabular data and JSON for
nested reports; a manifest records the resolved-config hash, the seed,
and library versions.  Exit codes: 0 success, 1 config error, 2 runtime
error.
"""

import argparse
import csv
import datetime
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, describe, load_config, parse_config
from .kernels import active_backend
from .process import check_stability, simulate_path
from .risk import (ReplicationRows, build_pipeline, check_norm_lemma, check_prop4,
                   check_prop5, make_seeds, monte_carlo_risk, oracle_bound_factor,
                   robust_risk, run_replications, summarize)
from .selection import fourier_estimates, piecewise_values, select
from .seqkernel import build_regression, grid_layout, points_to_csv
from .weights import family_metadata

MODES = ("simulate", "estimate", "select", "risk", "oracle-check",
         "diagnostics", "validate")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _write_json(path: str, obj) -> None:
    with open(path, "w") as f:
        json.dump(_jsonable(obj), f, sort_keys=True, indent=2)
        f.write("\n")


def _write_manifest(out_dir: str, cfg: ExperimentConfig, mode: str) -> None:
    import numba

    manifest = {
        "mode": mode,
        "config_sha256": cfg.sha256(),
        "base_seed": cfg.base_seed,
        "sizes": cfg.sizes,
        "versions": {"seqar": __version__, "numpy": np.__version__,
                     "numba": numba.__version__},
        "kernel_backend": active_backend(),
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)


def _ensure_out_dir(path: str) -> None:
    try:
        os.makedirs(path, exist_ok=True)
        probe = os.path.join(path, ".write_probe")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as exc:
        raise RuntimeError(f"output directory not writable: {path} ({exc})") from None


def _ensure_stable(cfg: ExperimentConfig) -> None:
    spec = cfg.model_spec(cfg.sizes[0])
    rep = check_stability(spec.S, cfg.stability(), a=cfg.a, b=cfg.b)
    if not rep.in_theta:
        raise ConfigError(
            f"model.s: {cfg.s_name!r} violates the stability set "
            f"(sup|S|={rep.sup_S:.4g} vs 1-eps={1 - cfg.eps:.4g}, "
            f"sup|S'|={rep.sup_dS:.4g} vs L={cfg.L:.4g})")


# ---------------------------------------------------------------------------
# mode implementations
# ---------------------------------------------------------------------------


def _mode_simulate(cfg: ExperimentConfig, out_dir: str) -> None:
    for n in cfg.sizes:
        spec = cfg.model_spec(n)
        path = simulate_path(spec, cfg.base_seed)
        x = np.concatenate([[spec.a], spec.design_points()])
        with open(os.path.join(out_dir, f"path_n{n}.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["k", "x", "y"])
            for k in range(n + 1):
                w.writerow([k, repr(float(x[k])), repr(float(path.y[k]))])


def _mode_estimate(cfg: ExperimentConfig, out_dir: str) -> None:
    _ensure_stable(cfg)
    for n in cfg.sizes:
        spec = cfg.model_spec(n)
        layout = grid_layout(spec, cfg.mu0)
        path = simulate_path(spec, cfg.base_seed)
        data = build_regression(path, layout, cfg.stability())
        with open(os.path.join(out_dir, f"points_n{n}.csv"), "w", newline="") as f:
            points_to_csv(data.point_results, f)
        with open(os.path.join(out_dir, f"regression_n{n}.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["l", "z", "Y", "sigma2"])
            for i in range(layout.d):
                w.writerow([i + 1, repr(float(data.z[i])), repr(float(data.Y[i])),
                            repr(float(data.sigma2[i]))])
        summary = {
            "n": n, "d": layout.d, "q": layout.q, "h": layout.h,
            "eps_tilde": layout.eps_tilde, "gamma_all": data.gamma_all,
            "gamma_ok_count": sum(p.gamma_ok for p in data.point_results),
            "sigma_bounds": list(data.sigma_bounds),
        }
        _write_json(os.path.join(out_dir, f"estimate_summary_n{n}.json"), summary)


def _mode_select(cfg: ExperimentConfig, out_dir: str) -> None:
    _ensure_stable(cfg)
    for n in cfg.sizes:
        spec = cfg.model_spec(n)
        pipe = build_pipeline(spec, cfg.stability(), cfg.procedure())
        path = simulate_path(spec, cfg.base_seed)
        data = build_regression(path, pipe.layout, cfg.stability())
        fe = fourier_estimates(data, pipe.basis)
        res = select(fe, pipe.family, cfg.delta, pipe.basis, gamma=data.gamma_all)
        chosen = pipe.family[res.lambda_index]
        meta = family_metadata(pipe.family)
        report = {
            "n": n, "d": pipe.layout.d, "delta": cfg.delta,
            "gamma": data.gamma_all, "lambda_index": res.lambda_index,
            "chosen": {"beta": chosen.alpha[0], "l": chosen.alpha[1],
                       "omega": chosen.omega},
            "nu": meta["nu"], "nu_star": meta["nu_star"],
            "costs": res.costs, "theta_hat": fe.theta_hat,
        }
        _write_json(os.path.join(out_dir, f"selection_n{n}.json"), report)
        ts = np.linspace(spec.a, spec.b, cfg.eval_points)
        vals = piecewise_values(res.estimates_on_grid, ts, pipe.layout.z)
        with open(os.path.join(out_dir, f"estimator_n{n}.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["t", "estimate"])
            for t, v in zip(ts, vals):
                w.writerow([repr(float(t)), repr(float(v))])


def _risk_rows_worker(payload) -> ReplicationRows:
    cfg_json, n, seeds = payload
    cfg = parse_config(json.loads(cfg_json))
    pipe = build_pipeline(cfg.model_spec(n), cfg.stability(), cfg.procedure())
    return run_replications(pipe, seeds)


def _risk_report(cfg: ExperimentConfig, n: int):
    seeds = make_seeds(cfg.base_seed, cfg.replications)
    if cfg.workers <= 1:
        return monte_carlo_risk(cfg.model_spec(n), cfg.stability(), cfg.procedure(),
                                cfg.replications, seeds=seeds)
    cfg_json = json.dumps(cfg.resolved(), sort_keys=True)
    chunks = np.array_split(np.asarray(seeds), cfg.workers)
    payloads = [(cfg_json, n, [int(s) for s in c]) for c in chunks if len(c)]
    with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
        parts = list(ex.map(_risk_rows_worker, payloads))
    rows = parts[0]
    for part in parts[1:]:
        rows = rows.merged_with(part)
    return summarize(rows)


def _report_json(report, n: int) -> dict:
    return {
        "n": n,
        "replications": report.replications,
        "per_lambda_risk": report.per_lambda_risk,
        "per_lambda_risk_emp": report.per_lambda_risk_emp,
        "std_errors": report.std_errors,
        "selected_risk": report.selected_risk,
        "selected_risk_emp": report.selected_risk_emp,
        "selected_std_error": report.selected_std_error,
        "oracle_risk": report.oracle_risk,
        "oracle_ratio": report.oracle_ratio,
        "gamma_c_frequency": report.gamma_c_frequency,
    }


def _write_rep_csv(report, path: str) -> None:
    rows = report.rows
    nu = rows.lambda_risk.shape[1]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["seed", "gamma"] + [f"risk_lambda_{i}" for i in range(nu)]
                   + ["selected_index", "selected_risk"])
        for r in range(rows.seeds.shape[0]):
            sel = int(rows.selected_index[r])
            w.writerow([int(rows.seeds[r]), int(rows.gamma[r])]
                       + [repr(float(v)) for v in rows.lambda_risk[r]]
                       + [sel, repr(float(rows.lambda_risk[r, sel]))])


def _mode_risk(cfg: ExperimentConfig, out_dir: str) -> None:
    _ensure_stable(cfg)
    for n in cfg.sizes:
        report = _risk_report(cfg, n)
        _write_json(os.path.join(out_dir, f"risk_report_n{n}.json"),
                    _report_json(report, n))
        _write_rep_csv(report, os.path.join(out_dir, f"risk_reps_n{n}.csv"))


def _mode_oracle_check(cfg: ExperimentConfig, out_dir: str) -> None:
    _ensure_stable(cfg)
    factor = oracle_bound_factor(cfg.delta)
    per_n = {}
    selected_by_n = {}
    for n in cfg.sizes:
        report = _risk_report(cfg, n)
        body = _report_json(report, n)
        body["bound_factor"] = factor
        body["oracle_dominance_ok"] = bool(
            report.selected_risk >= report.oracle_risk
            - 2.0 * (report.selected_std_error
                     if np.isfinite(report.selected_std_error) else 0.0))
        per_n[str(n)] = body
        selected_by_n[n] = report.selected_risk
        _write_rep_csv(report, os.path.join(out_dir, f"risk_reps_n{n}.csv"))
    ns = sorted(selected_by_n)
    decay = {"sizes": ns,
             "selected_risk": [selected_by_n[n] for n in ns],
             "decreasing_overall": bool(selected_by_n[ns[-1]] < selected_by_n[ns[0]])
             if len(ns) >= 2 else None}
    robust = None
    if len(cfg.densities) >= 1:
        rr = robust_risk(cfg.model_spec(ns[-1]), cfg.density_set(), cfg.stability(),
                         cfg.procedure(), cfg.replications, base_seed=cfg.base_seed)
        dominance = all(
            bool(np.all(rr.per_lambda_risk >= m.per_lambda_risk - 1e-15))
            for m in rr.member_reports.values())
        robust = {
            "n": ns[-1], "densities": list(rr.densities),
            "per_lambda_risk_max": rr.per_lambda_risk,
            "selected_risk_max": rr.selected_risk,
            "oracle_risk": rr.oracle_risk, "oracle_ratio": rr.oracle_ratio,
            "dominance_ok": bool(dominance),
            "member_selected_risk": {k: m.selected_risk
                                     for k, m in rr.member_reports.items()},
        }
    _write_json(os.path.join(out_dir, "oracle_check.json"),
                {"bound_factor": factor, "delta": cfg.delta, "per_n": per_n,
                 "risk_decay": decay, "robust": robust})


def _mode_diagnostics(cfg: ExperimentConfig, out_dir: str) -> None:
    _ensure_stable(cfg)
    out = {}
    for n in cfg.sizes:
        spec = cfg.model_spec(n)
        pipe = build_pipeline(spec, cfg.stability(), cfg.procedure())
        d = pipe.layout.d
        # widest-support weight vector in the family (beta = 1, largest scale)
        lam = max(pipe.family, key=lambda w: (np.count_nonzero(w.values > 0),
                                              -w.alpha[0])).values
        p4 = check_prop4(spec, cfg.stability(), cfg.procedure(), lam,
                         cfg.replications, base_seed=cfg.base_seed)
        e1 = np.zeros(d)
        e1[0] = 1.0
        p5a = check_prop5(spec, cfg.stability(), cfg.procedure(), e1,
                          cfg.replications, base_seed=cfg.base_seed)
        rng = np.random.Generator(np.random.Philox(key=np.uint64(cfg.base_seed)))
        v = rng.standard_normal(d)
        v /= np.sqrt(np.sum(v ** 2))
        p5b = check_prop5(spec, cfg.stability(), cfg.procedure(), v,
                          cfg.replications, base_seed=cfg.base_seed)
        path = simulate_path(spec, cfg.base_seed)
        data = build_regression(path, pipe.layout, cfg.stability())
        fe = fourier_estimates(data, pipe.basis)
        res = select(fe, pipe.family, cfg.delta, pipe.basis, gamma=data.gamma_all)
        lemma = check_norm_lemma(spec.S, res.estimates_on_grid, 1.0, spec.a, spec.b)
        out[str(n)] = {"prop4": p4, "prop5_e1": p5a, "prop5_random_unit": p5b,
                       "norm_lemma": lemma}
    _write_json(os.path.join(out_dir, "diagnostics.json"), out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="seqar",
        description="Sequential estimation and model selection experiments "
                    "for varying-coefficient autoregressions.")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None,
                       help="override run.base_seed")
        p.add_argument("--out", default=None, help="override run.out_dir")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.base_seed = args.seed
        if args.out is not None:
            cfg.out_dir = args.out

        if args.mode == "validate":
            for line in describe(cfg):
                print(line)
            return 0

        _ensure_out_dir(cfg.out_dir)
        dispatch = {
            "simulate": _mode_simulate,
            "estimate": _mode_estimate,
            "select": _mode_select,
            "risk": _mode_risk,
            "oracle-check": _mode_oracle_check,
            "diagnostics": _mode_diagnostics,
        }
        dispatch[args.mode](cfg, cfg.out_dir)
        _write_manifest(cfg.out_dir, cfg, args.mode)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
