"""Hot numeric kernels: numba-accelerated with a pure-numpy fallback.

The backend is selected by the ``SEQAR_BACKEND`` environment variable
("numba" or "numpy"); when unset, numba is used if importable.  Both
backends execute the same floating-point operations in the same order,
so their outputs are bit-for-bit identical (asserted in the test suite).

Running sums switch to compensated (Kahan) accumulation for windows
longer than ``KAHAN_THRESHOLD`` so that stopping-time comparisons stay
reproducible on very long windows.
"""

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


KAHAN_THRESHOLD = 10_000


def active_backend() -> str:
    """Resolve the kernel backend name from the environment."""
    env = os.environ.get("SEQAR_BACKEND", "").strip().lower()
    if env in ("numpy", "python"):
        return "numpy"
    if env == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("SEQAR_BACKEND=numba but numba is not importable")
        return "numba"
    if env:
        raise ValueError(f"unknown SEQAR_BACKEND {env!r}")
    return "numba" if HAS_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy backend helpers
# ---------------------------------------------------------------------------


def _kahan_cumsum_py(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    s = 0.0
    c = 0.0
    for i in range(x.shape[0]):
        t = x[i] - c
        u = s + t
        c = (u - s) - t
        s = u
        out[i] = s
    return out


def _running_np(x: np.ndarray) -> np.ndarray:
    # np.cumsum is a sequential left-to-right scan, matching the numba loops
    if x.shape[0] > KAHAN_THRESHOLD:
        return _kahan_cumsum_py(x)
    return np.cumsum(x)


def _total_np(x: np.ndarray) -> float:
    if x.shape[0] == 0:
        return 0.0
    return float(_running_np(x)[-1])


# ---------------------------------------------------------------------------
# AR(1) path recurrence: y[k] = s[k-1] * y[k-1] + xi[k-1]
# ---------------------------------------------------------------------------


def _ar1_path_np(svals: np.ndarray, xi: np.ndarray, y0: float) -> np.ndarray:
    n = svals.shape[0]
    y = np.empty(n + 1)
    y[0] = y0
    prev = y0
    for k in range(n):
        prev = svals[k] * prev + xi[k]
        y[k + 1] = prev
    return y


@njit(cache=True)
def _ar1_path_nb(svals, xi, y0):
    n = svals.shape[0]
    y = np.empty(n + 1)
    y[0] = y0
    prev = y0
    for k in range(n):
        prev = svals[k] * prev + xi[k]
        y[k + 1] = prev
    return y


def ar1_path(svals: np.ndarray, xi: np.ndarray, y0: float, backend: str | None = None) -> np.ndarray:
    """Run the autoregressive recurrence for one noise realization."""
    b = backend or active_backend()
    svals = np.ascontiguousarray(svals, dtype=np.float64)
    xi = np.ascontiguousarray(xi, dtype=np.float64)
    if svals.shape != xi.shape:
        raise ValueError("coefficient and noise arrays must have equal length")
    if b == "numba":
        return _ar1_path_nb(svals, xi, float(y0))
    return _ar1_path_np(svals, xi, float(y0))


# ---------------------------------------------------------------------------
# per-point sequential procedure scan
#
# For each grid point l with window [k1, k2] and pilot endpoint iota:
#   pilot     = sum(y[j-1]*y[j], j=k1..iota) / sum(y[j-1]^2, j=k1..iota)
#   proj      = clip(pilot, -1+eps_t, 1-eps_t);  gtil = 1 - proj^2
#   H         = (1 - eps_t) * (k2 - iota - 1) / gtil
#   A(k)      = sum(y[j-1]^2, j=iota+1..k); tau = first k <= k2 with A(k) >= H
#   gamma_ok  = A(k2-1) >= H
#   kappa solves A(tau-1) + kappa^2 * y[tau-1]^2 = H   (on gamma_ok)
#   estimate  = (sum(y[j-1]*y[j], j=iota+1..tau-1) + kappa*y[tau-1]*y[tau]) / H
# ---------------------------------------------------------------------------


def _scan_all_np(y, k1, k2, iota, eps_t):
    d = k1.shape[0]
    pilot = np.zeros(d)
    proj = np.zeros(d)
    gtil = np.ones(d)
    H = np.zeros(d)
    tau = np.zeros(d, dtype=np.int64)
    kappa = np.full(d, np.nan)
    estimate = np.zeros(d)
    gamma_ok = np.zeros(d, dtype=np.bool_)
    degenerate = np.zeros(d, dtype=np.bool_)
    lo, hi = -1.0 + eps_t, 1.0 - eps_t
    for li in range(d):
        a1, a2, io = int(k1[li]), int(k2[li]), int(iota[li])
        num = _total_np(y[a1 - 1 : io] * y[a1:io + 1])
        den = _total_np(y[a1 - 1 : io] ** 2)
        if den > 0.0:
            p = num / den
        else:
            p = 0.0
            degenerate[li] = True
        pr = min(max(p, lo), hi)
        g = 1.0 - pr * pr
        h = (1.0 - eps_t) * (a2 - io - 1) / g
        w2 = y[io:a2] ** 2  # y[j-1]^2 for j = iota+1 .. k2
        cum = _running_np(w2)
        m = a2 - io - 1
        gok = cum[m - 1] >= h
        idx = int(np.searchsorted(cum, h, side="left"))
        t = io + 1 + idx if idx < cum.shape[0] else a2
        pilot[li], proj[li], gtil[li], H[li], tau[li] = p, pr, g, h, t
        gamma_ok[li] = gok
        if gok:
            a_before = cum[idx - 1] if idx >= 1 else 0.0
            jump = w2[idx]
            kap = np.sqrt((h - a_before) / jump)
            prod = y[io:a2] * y[io + 1 : a2 + 1]  # y[j-1]*y[j] for j = iota+1 .. k2
            pcum = _running_np(prod)
            head = pcum[idx - 1] if idx >= 1 else 0.0
            kappa[li] = kap
            estimate[li] = (head + kap * prod[idx]) / h
    return pilot, proj, gtil, H, tau, kappa, estimate, gamma_ok, degenerate


@njit(cache=True)
def _running_nb(x):
    out = np.empty_like(x)
    n = x.shape[0]
    if n > KAHAN_THRESHOLD:
        s = 0.0
        c = 0.0
        for i in range(n):
            t = x[i] - c
            u = s + t
            c = (u - s) - t
            s = u
            out[i] = s
    else:
        s = 0.0
        for i in range(n):
            s += x[i]
            out[i] = s
    return out


@njit(cache=True)
def _total_nb(x):
    n = x.shape[0]
    if n == 0:
        return 0.0
    if n > KAHAN_THRESHOLD:
        s = 0.0
        c = 0.0
        for i in range(n):
            t = x[i] - c
            u = s + t
            c = (u - s) - t
            s = u
        return s
    s = 0.0
    for i in range(n):
        s += x[i]
    return s


@njit(cache=True)
def _scan_all_nb(y, k1, k2, iota, eps_t):
    d = k1.shape[0]
    pilot = np.zeros(d)
    proj = np.zeros(d)
    gtil = np.ones(d)
    H = np.zeros(d)
    tau = np.zeros(d, dtype=np.int64)
    kappa = np.full(d, np.nan)
    estimate = np.zeros(d)
    gamma_ok = np.zeros(d, dtype=np.bool_)
    degenerate = np.zeros(d, dtype=np.bool_)
    lo = -1.0 + eps_t
    hi = 1.0 - eps_t
    for li in range(d):
        a1 = k1[li]
        a2 = k2[li]
        io = iota[li]
        num = _total_nb(y[a1 - 1 : io] * y[a1 : io + 1])
        den = _total_nb(y[a1 - 1 : io] ** 2)
        if den > 0.0:
            p = num / den
        else:
            p = 0.0
            degenerate[li] = True
        pr = min(max(p, lo), hi)
        g = 1.0 - pr * pr
        h = (1.0 - eps_t) * (a2 - io - 1) / g
        w2 = y[io:a2] ** 2
        cum = _running_nb(w2)
        m = a2 - io - 1
        gok = cum[m - 1] >= h
        idx = np.searchsorted(cum, h, side="left")
        if idx < cum.shape[0]:
            t = io + 1 + idx
        else:
            t = a2
        pilot[li] = p
        proj[li] = pr
        gtil[li] = g
        H[li] = h
        tau[li] = t
        gamma_ok[li] = gok
        if gok:
            if idx >= 1:
                a_before = cum[idx - 1]
            else:
                a_before = 0.0
            jump = w2[idx]
            kap = np.sqrt((h - a_before) / jump)
            prod = y[io:a2] * y[io + 1 : a2 + 1]
            pcum = _running_nb(prod)
            if idx >= 1:
                head = pcum[idx - 1]
            else:
                head = 0.0
            kappa[li] = kap
            estimate[li] = (head + kap * prod[idx]) / h
    return pilot, proj, gtil, H, tau, kappa, estimate, gamma_ok, degenerate


def scan_all_points(y, k1, k2, iota, eps_t, backend: str | None = None):
    """Run the pilot/threshold/stopping scan for every grid point.

    Returns per-point arrays
    ``(pilot, proj, gamma_tilde, H, tau, kappa, estimate, gamma_ok, degenerate)``.
    """
    b = backend or active_backend()
    y = np.ascontiguousarray(y, dtype=np.float64)
    k1 = np.ascontiguousarray(k1, dtype=np.int64)
    k2 = np.ascontiguousarray(k2, dtype=np.int64)
    iota = np.ascontiguousarray(iota, dtype=np.int64)
    if b == "numba":
        return _scan_all_nb(y, k1, k2, iota, float(eps_t))
    return _scan_all_np(y, k1, k2, iota, float(eps_t))


# ---------------------------------------------------------------------------
# always-defined noise variables
#
# Weight sequence per point: qc_j = y[j-1] for iota+1 <= j < k2 and
# qc_{k2} = sqrt(H), so the squared running sum reaches H by j = k2 on
# every path.  The modified stopping time tau_chk is the first crossing,
# kappa_chk the exact-crossing correction, and
#   eta = (sum(qc_j * xi_j, j=iota+1..tau_chk-1)
#          + kappa_chk * qc_{tau_chk} * xi_{tau_chk}) / H.
# ---------------------------------------------------------------------------


def _eta_all_np(y, xi, k1, k2, iota, H):
    d = k1.shape[0]
    eta = np.zeros(d)
    tau_chk = np.zeros(d, dtype=np.int64)
    kappa_chk = np.zeros(d)
    for li in range(d):
        a2, io = int(k2[li]), int(iota[li])
        h = H[li]
        sq = np.sqrt(h)
        qc = y[io : a2 - 1].copy()  # qc_j for j = iota+1 .. k2-1
        w2 = np.empty(a2 - io)
        w2[: a2 - io - 1] = qc * qc
        w2[a2 - io - 1] = h
        cum = _running_np(w2)
        idx = int(np.searchsorted(cum, h, side="left"))
        a_before = cum[idx - 1] if idx >= 1 else 0.0
        kap = np.sqrt((h - a_before) / w2[idx])
        qx = np.empty(a2 - io)
        qx[: a2 - io - 1] = qc * xi[io : a2 - 1]
        qx[a2 - io - 1] = sq * xi[a2 - 1]
        qcum = _running_np(qx)
        head = qcum[idx - 1] if idx >= 1 else 0.0
        eta[li] = (head + kap * qx[idx]) / h
        tau_chk[li] = io + 1 + idx
        kappa_chk[li] = kap
    return eta, tau_chk, kappa_chk


@njit(cache=True)
def _eta_all_nb(y, xi, k1, k2, iota, H):
    d = k1.shape[0]
    eta = np.zeros(d)
    tau_chk = np.zeros(d, dtype=np.int64)
    kappa_chk = np.zeros(d)
    for li in range(d):
        a2 = k2[li]
        io = iota[li]
        h = H[li]
        sq = np.sqrt(h)
        w = a2 - io
        w2 = np.empty(w)
        for i in range(w - 1):
            v = y[io + i]
            w2[i] = v * v
        w2[w - 1] = h
        cum = _running_nb(w2)
        idx = np.searchsorted(cum, h, side="left")
        if idx >= 1:
            a_before = cum[idx - 1]
        else:
            a_before = 0.0
        kap = np.sqrt((h - a_before) / w2[idx])
        qx = np.empty(w)
        for i in range(w - 1):
            qx[i] = y[io + i] * xi[io + i]
        qx[w - 1] = sq * xi[a2 - 1]
        qcum = _running_nb(qx)
        if idx >= 1:
            head = qcum[idx - 1]
        else:
            head = 0.0
        eta[li] = (head + kap * qx[idx]) / h
        tau_chk[li] = io + 1 + idx
        kappa_chk[li] = kap
    return eta, tau_chk, kappa_chk


def eta_all_points(y, xi, k1, k2, iota, H, backend: str | None = None):
    """Compute the always-defined noise variables for every grid point.

    Returns ``(eta, tau_chk, kappa_chk)``.
    """
    b = backend or active_backend()
    y = np.ascontiguousarray(y, dtype=np.float64)
    xi = np.ascontiguousarray(xi, dtype=np.float64)
    k1 = np.ascontiguousarray(k1, dtype=np.int64)
    k2 = np.ascontiguousarray(k2, dtype=np.int64)
    iota = np.ascontiguousarray(iota, dtype=np.int64)
    H = np.ascontiguousarray(H, dtype=np.float64)
    if b == "numba":
        return _eta_all_nb(y, xi, k1, k2, iota, H)
    return _eta_all_np(y, xi, k1, k2, iota, H)
