import math

import numpy as np
import pytest

from seqar import (StabilityParams, build_regression, eta_variables, grid_layout,
                   pilot_estimate, run_point_procedure, sigma_band, simulate_path,
                   threshold, upsilon_statistic)
from seqar.seqkernel import points_to_csv, project_pilot

from conftest import STAB, const_spec, sine_spec, square_wave_targets, \
    forced_noise_for, zero_spec
from refimpl import (ref_eta, ref_point_procedure, ref_stopping_stage)


# --- layout -----------------------------------------------------------------

def test_layout_n100_exact_integers():
    lay = grid_layout(zero_spec(100))
    assert lay.d == 10 and lay.h == 0.05 and lay.q == 2
    assert lay.z[0] == 0.1 and lay.z[-1] == 1.0
    assert lay.k1[0] == 6 and lay.k2[0] == 15 and lay.iota[0] == 8
    assert lay.k2[-1] == 100  # clamped to n at the right endpoint
    assert abs(lay.eps_tilde - 1.0 / (2.0 + math.log(100))) < 1e-15


def test_layout_pilot_length_follows_mu0():
    assert grid_layout(zero_spec(100), mu0=0.5).q == 2   # floor(5^0.5)
    assert grid_layout(zero_spec(100), mu0=0.9).q == 4   # floor(5^0.9)


def test_layout_windows_disjoint_and_consecutive():
    for n in (100, 317, 2000):
        lay = grid_layout(zero_spec(n))
        assert np.all(lay.k1[1:] == lay.k2[:-1] + 1)
        assert lay.k1[0] >= 1 and lay.k2[-1] == n


def test_layout_window_matches_bandwidth_neighborhood():
    # j belongs to window l exactly when |x_j - z_l| <= h, ties going left
    lay = grid_layout(zero_spec(300))
    spec = zero_spec(300)
    x = spec.design_points()
    for li in (0, 3, lay.d - 1):
        inside = np.arange(lay.k1[li], lay.k2[li] + 1)
        assert np.all(np.abs(x[inside - 1] - lay.z[li]) <= lay.h * (1 + 1e-12))
        if lay.k1[li] - 1 >= 1:
            assert abs(x[lay.k1[li] - 2] - lay.z[li]) >= lay.h * (1 - 1e-12)


def test_layout_rejects_small_n():
    with pytest.raises(ValueError):
        grid_layout(zero_spec(8))
    # last window loses all post-pilot observations at these sizes
    with pytest.raises(ValueError):
        grid_layout(zero_spec(25))
    with pytest.raises(ValueError):
        grid_layout(zero_spec(64))


def test_layout_mu0_guard():
    with pytest.raises(ValueError):
        grid_layout(zero_spec(100), mu0=1.0)


# --- pilot and threshold ----------------------------------------------------

def test_pilot_constant_path_projection():
    spec = zero_spec(55, y0=1.0)
    path = simulate_path(spec, 0, xi=np.ones(55))
    lay = grid_layout(spec)
    est = pilot_estimate(path, lay, 1)
    assert est.pilot == 1.0 and not est.degenerate
    assert abs(est.pilot_proj - 0.83353) < 2e-5


def test_pilot_projection_clip_arithmetic():
    assert project_pilot(0.5, 0.1) == 0.5
    assert project_pilot(-2.0, 0.1) == -0.9
    assert project_pilot(2.0, 0.1) == 0.9


def test_pilot_degenerate_zero_path():
    spec = zero_spec(100, y0=0.0)
    path = simulate_path(spec, 0, xi=np.zeros(100))
    lay = grid_layout(spec)
    est = pilot_estimate(path, lay, 2)
    assert est.degenerate and est.pilot == 0.0


def test_threshold_hand_arithmetic():
    # pinned formula values: (1-e) * m / (1 - proj^2)
    assert 0.9 * 20 / 1.0 == 18.0
    assert abs(0.9 * 20 / (1 - 0.36) - 28.125) < 1e-12
    assert abs(0.9 * 10 / (1 - 0.81) - 47.368421052631575) < 1e-9
    # wiring: threshold() evaluates the same formula at the layout's values
    lay = grid_layout(zero_spec(400))
    m = lay.k2[0] - lay.iota[0] - 1
    for proj in (0.0, 0.6):
        expected = (1 - lay.eps_tilde) * m / (1 - proj ** 2)
        assert threshold(lay, 1, proj) == expected


def test_threshold_rejects_unprojected_pilot():
    lay = grid_layout(zero_spec(400))
    with pytest.raises(ValueError):
        threshold(lay, 1, 0.999)


# --- stopping stage (reference oracle on constructed windows) ----------------

def test_stopping_stage_unit_path_integer_threshold():
    y = np.ones(40)
    out = ref_stopping_stage(y, iota=5, k2=20, H=5.0)
    assert out["tau"] == 10 and out["a_before"] == 4.0
    assert out["kappa"] == 1.0 and out["gamma_ok"]
    assert out["estimate"] == (4.0 + 1.0) / 5.0


def test_stopping_stage_unit_path_fractional_threshold():
    y = np.ones(40)
    out = ref_stopping_stage(y, iota=5, k2=20, H=4.5)
    assert out["tau"] == 10
    assert abs(out["kappa"] - math.sqrt(0.5)) < 1e-12
    assert abs(out["estimate"] - (4.0 + math.sqrt(0.5)) / 4.5) < 1e-6
    assert abs(out["estimate"] - 1.046024) < 1e-6


def test_stopping_stage_dead_window():
    y = np.zeros(40)
    y[:6] = 1.0
    out = ref_stopping_stage(y, iota=5, k2=20, H=3.0)
    assert not out["gamma_ok"] and out["estimate"] == 0.0 and out["tau"] == 20


@pytest.mark.parametrize("n,seed", [(100, 0), (400, 3), (2000, 9)])
def test_point_procedure_matches_reference(n, seed):
    spec = sine_spec(n)
    path = simulate_path(spec, seed)
    lay = grid_layout(spec)
    for l in range(1, lay.d + 1):
        got = run_point_procedure(path, lay, l)
        ref = ref_point_procedure(path.y, *lay.window_indices(l), lay.eps_tilde)
        assert got.pilot == ref["pilot"]
        assert got.pilot_proj == ref["proj"]
        assert got.H == ref["H"]
        assert got.tau == ref["tau"]
        assert got.gamma_ok == ref["gamma_ok"]
        if got.gamma_ok:
            assert got.kappa == ref["kappa"]
            assert got.estimate == ref["estimate"]
        else:
            assert math.isnan(got.kappa) and got.estimate == 0.0
        assert got.sigma2 == 1.0 / got.H


def test_unit_path_fails_threshold_end_to_end():
    # constant path pins the pilot at the projection edge, making the
    # threshold unreachable: gamma must fail and the estimate must vanish
    spec = zero_spec(100, y0=1.0)
    path = simulate_path(spec, 0, xi=np.ones(100))
    lay = grid_layout(spec)
    res = run_point_procedure(path, lay, 1)
    eps_t = lay.eps_tilde
    expected_H = (1 - eps_t) * 6 / (eps_t * (2 - eps_t))
    assert abs(res.H - expected_H) < 1e-12
    assert not res.gamma_ok and res.estimate == 0.0


# --- regression assembly ----------------------------------------------------

def test_square_wave_all_points_succeed(square_path_n100):
    lay = grid_layout(square_path_n100.spec)
    data = build_regression(square_path_n100, lay, STAB)
    assert data.gamma_all
    assert np.array_equal(data.Y, [p.estimate for p in data.point_results])
    assert np.any(data.Y != 0.0)
    for p in data.point_results:
        assert abs(p.pilot) == pytest.approx(1.0 / 3.0)
        assert 0.0 < p.kappa <= 1.0


def test_square_wave_stopping_identity(square_path_n100):
    # accumulated information plus the corrected last term equals H exactly
    lay = grid_layout(square_path_n100.spec)
    data = build_regression(square_path_n100, lay, STAB)
    y = square_path_n100.y
    for p in data.point_results:
        a_before = np.sum(y[p.iota : p.tau - 1] ** 2)
        resid = a_before + p.kappa ** 2 * y[p.tau - 1] ** 2 - p.H
        assert abs(resid) <= 1e-9 * p.H


def test_any_failed_point_zeroes_all_responses():
    spec = sine_spec(2000)
    lay = grid_layout(spec)
    path = simulate_path(spec, 1)
    data = build_regression(path, lay, STAB)
    if not data.gamma_all:
        assert np.all(data.Y == 0.0)
    assert data.gamma_all == all(p.gamma_ok for p in data.point_results)


def test_sigma_band_closed_forms():
    lay = grid_layout(zero_spec(10_000))
    s0, s1 = sigma_band(lay, StabilityParams(0.1, 2.0))
    eps_t = 1.0 / (2.0 + math.log(10_000))
    assert abs(s0 - (1 - 0.01) / (2 * (1 - eps_t) * 50.0)) < 1e-15
    assert abs(s1 - 1.0 / ((1 - eps_t) * (100.0 - 7 - 3))) < 1e-15
    assert s0 < s1


def test_sigma2_is_inverse_threshold():
    spec = sine_spec(400)
    path = simulate_path(spec, 2)
    lay = grid_layout(spec)
    data = build_regression(path, lay, STAB)
    for p in data.point_results:
        assert p.sigma2 == 1.0 / p.H
    assert np.array_equal(data.sigma2, [1.0 / p.H for p in data.point_results])


# --- always-defined noise variables ------------------------------------------

def test_eta_zero_noise_gives_zero():
    spec = const_spec(100, 0.5, y0=1.0)
    path = simulate_path(spec, 0, xi=np.zeros(100))
    lay = grid_layout(spec)
    ev = eta_variables(path, lay)
    assert np.array_equal(ev.eta, np.zeros(lay.d))


def test_eta_requires_noise_record():
    spec = sine_spec(100)
    path = simulate_path(spec, 0, record_noise=False)
    with pytest.raises(ValueError):
        eta_variables(path, grid_layout(spec))


def test_eta_matches_reference_and_stays_in_window():
    spec = sine_spec(900)
    lay = grid_layout(spec)
    for seed in (0, 1, 2):
        path = simulate_path(spec, seed)
        Hs = [run_point_procedure(path, lay, l).H for l in range(1, lay.d + 1)]
        ev = eta_variables(path, lay)
        for l in range(1, lay.d + 1):
            k1, k2, iota = lay.window_indices(l)
            ref = ref_eta(path.y, path.xi, iota, k2, Hs[l - 1])
            assert ev.eta[l - 1] == ref["eta"]
            assert ev.tau_check[l - 1] == ref["tau"] <= k2
            assert ev.kappa_check[l - 1] == ref["kappa"]
            assert 0.0 < ev.kappa_check[l - 1] <= 1.0


def test_eta_agrees_with_observable_procedure_on_success(square_path_n100):
    lay = grid_layout(square_path_n100.spec)
    data = build_regression(square_path_n100, lay, STAB)
    assert data.gamma_all
    ev = eta_variables(square_path_n100, lay)
    for p in data.point_results:
        assert ev.tau_check[p.l - 1] == p.tau
        assert ev.kappa_check[p.l - 1] == p.kappa
    # with a zero coefficient the response is exactly the main noise term
    assert np.allclose(ev.eta, data.Y, atol=1e-12, rtol=0.0)


def test_eta_weight_supports_are_disjoint():
    # the squared-weight construction lives on the point's own window, so
    # weights from different points never overlap
    spec = sine_spec(400)
    lay = grid_layout(spec)
    path = simulate_path(spec, 4)
    n = spec.n
    supports = []
    for l in range(1, lay.d + 1):
        k1, k2, iota = lay.window_indices(l)
        q = np.zeros(n + 1)
        q[iota + 1 : k2] = path.y[iota : k2 - 1]
        q[k2] = 1.0  # placeholder for sqrt(H), support is what matters
        supports.append(q)
    for i in range(len(supports)):
        for j in range(i + 1, len(supports)):
            assert np.all(supports[i] * supports[j] == 0.0)


def test_eta_moments_small_monte_carlo():
    spec = zero_spec(2500)
    lay = grid_layout(spec)
    reps = 400
    etas = np.empty((reps, lay.d))
    norm2 = np.empty((reps, lay.d))
    for r in range(reps):
        path = simulate_path(spec, 40_000 + r)
        ev = eta_variables(path, lay)
        etas[r] = ev.eta
        norm2[r] = ev.eta ** 2 / ev.sigma2
    se_mean = etas.std(axis=0, ddof=1) / math.sqrt(reps)
    assert np.all(np.abs(etas.mean(axis=0)) <= 4.0 * se_mean)
    se_var = norm2.std(axis=0, ddof=1) / math.sqrt(reps)
    assert np.all(np.abs(norm2.mean(axis=0) - 1.0) <= 4.0 * se_var)


# --- window statistic ---------------------------------------------------------

def test_upsilon_trivial_values():
    spec = zero_spec(50, y0=1.0)
    path = simulate_path(spec, 0, xi=np.ones(50))
    assert upsilon_statistic(path, 10, 20, 1.0) == 0.0
    spec2 = zero_spec(50, y0=2.0)
    path2 = simulate_path(spec2, 0, xi=2.0 * np.ones(50))
    assert upsilon_statistic(path2, 10, 20, 1.0) == 3.0


def test_upsilon_concentration_calibrated_band():
    # Monte Carlo oracle: for the 0.5-constant model over a sqrt(n) window,
    # |upsilon| <= 0.5 in at least 95% of replications (measured 97%)
    spec = const_spec(10_000, 0.5)
    hits = 0
    for r in range(500):
        path = simulate_path(spec, 1000 + r, record_noise=False)
        if abs(upsilon_statistic(path, 5000, 5100, 0.75)) <= 0.5:
            hits += 1
    assert hits >= 475


def test_upsilon_argument_validation():
    path = simulate_path(zero_spec(50), 0)
    with pytest.raises(ValueError):
        upsilon_statistic(path, 10, 10, 1.0)
    with pytest.raises(ValueError):
        upsilon_statistic(path, -1, 10, 1.0)
    with pytest.raises(ValueError):
        upsilon_statistic(path, 10, 51, 1.0)
    with pytest.raises(ValueError):
        upsilon_statistic(path, 10, 20, 1.5)


# --- CSV dump -----------------------------------------------------------------

def test_points_csv_columns(square_path_n100, tmp_path):
    lay = grid_layout(square_path_n100.spec)
    data = build_regression(square_path_n100, lay, STAB)
    out = tmp_path / "points.csv"
    with open(out, "w", newline="") as f:
        points_to_csv(data.point_results, f)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "l,k1,k2,iota,pilot,pilot_proj,H,tau,kappa,estimate,gamma_ok,sigma2"
    assert len(lines) == lay.d + 1
