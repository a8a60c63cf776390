import math

import numpy as np
import pytest

from seqar import kernels
from seqar.kernels import (ar1_path, eta_all_points, scan_all_points,
                           _kahan_cumsum_py, _running_np)
from seqar.process import NoiseDensity, path_rng
from seqar.seqkernel import grid_layout

from conftest import sine_spec


def _random_setup(n, seed):
    spec = sine_spec(n)
    lay = grid_layout(spec)
    xi = NoiseDensity("gaussian").draw(path_rng(seed), n)
    y = ar1_path(spec.coefficient_values(), xi, 0.0, backend="numpy")
    return lay, xi, y


def test_ar1_backends_bit_identical():
    rng = path_rng(3)
    svals = rng.uniform(-0.9, 0.9, 5000)
    xi = rng.standard_normal(5000)
    a = ar1_path(svals, xi, 2.5, backend="numba")
    b = ar1_path(svals, xi, 2.5, backend="numpy")
    assert np.array_equal(a, b)


def test_ar1_matches_naive_recurrence():
    svals = np.array([0.5, -0.25, 0.75])
    xi = np.array([1.0, 2.0, -1.0])
    y = ar1_path(svals, xi, 4.0)
    expected = [4.0]
    for k in range(3):
        expected.append(svals[k] * expected[-1] + xi[k])
    assert np.array_equal(y, np.array(expected))


def test_ar1_length_mismatch():
    with pytest.raises(ValueError):
        ar1_path(np.zeros(3), np.zeros(4), 0.0)


@pytest.mark.parametrize("n,seed", [(100, 0), (400, 1), (2000, 2)])
def test_scan_backends_bit_identical(n, seed):
    lay, _, y = _random_setup(n, seed)
    out_nb = scan_all_points(y, lay.k1, lay.k2, lay.iota, lay.eps_tilde,
                             backend="numba")
    out_np = scan_all_points(y, lay.k1, lay.k2, lay.iota, lay.eps_tilde,
                             backend="numpy")
    for a, b in zip(out_nb, out_np):
        assert np.array_equal(a, b, equal_nan=True)


@pytest.mark.parametrize("n,seed", [(100, 5), (900, 6)])
def test_eta_backends_bit_identical(n, seed):
    lay, xi, y = _random_setup(n, seed)
    H = scan_all_points(y, lay.k1, lay.k2, lay.iota, lay.eps_tilde)[3]
    out_nb = eta_all_points(y, xi, lay.k1, lay.k2, lay.iota, H, backend="numba")
    out_np = eta_all_points(y, xi, lay.k1, lay.k2, lay.iota, H, backend="numpy")
    for a, b in zip(out_nb, out_np):
        assert np.array_equal(a, b)


def test_kahan_cumsum_matches_fsum():
    rng = path_rng(11)
    x = rng.uniform(0.0, 1.0, 2048) * 10.0 ** rng.integers(-8, 8, 2048)
    ks = _kahan_cumsum_py(x)
    for idx in (0, 1, 100, 2047):
        exact = math.fsum(x[: idx + 1])
        assert abs(ks[idx] - exact) <= 4 * np.finfo(float).eps * abs(exact)


def test_running_switches_to_kahan(monkeypatch):
    monkeypatch.setattr(kernels, "KAHAN_THRESHOLD", 10)
    x = np.full(50, 0.1)
    out = _running_np(x)
    assert abs(out[-1] - 5.0) < 1e-14


def test_active_backend_env(monkeypatch):
    monkeypatch.setenv("SEQAR_BACKEND", "numpy")
    assert kernels.active_backend() == "numpy"
    monkeypatch.setenv("SEQAR_BACKEND", "numba")
    assert kernels.active_backend() == "numba"
    monkeypatch.setenv("SEQAR_BACKEND", "julia")
    with pytest.raises(ValueError):
        kernels.active_backend()
    monkeypatch.delenv("SEQAR_BACKEND")
    assert kernels.active_backend() in ("numba", "numpy")
