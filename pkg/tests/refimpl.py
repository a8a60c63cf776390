"""Slow reference implementations used as independent oracles.

Everything here is written as plain per-index loops, straight from the
defining formulas, with no vectorization and no shared code with the
package kernels.
"""

import math


def ref_pilot(y, k1, iota):
    num = 0.0
    den = 0.0
    for j in range(k1, iota + 1):
        num += y[j - 1] * y[j]
        den += y[j - 1] ** 2
    if den == 0.0:
        return 0.0, True
    return num / den, False


def ref_stopping_stage(y, iota, k2, H):
    """Stopping time, correction, success flag, and estimate for a given H.

    Returns dict with tau, a_before, kappa, gamma_ok, estimate.
    """
    avals = {}
    acc = 0.0
    for k in range(iota + 1, k2 + 1):
        acc += y[k - 1] ** 2
        avals[k] = acc
    gamma_ok = avals[k2 - 1] >= H
    tau = k2
    for k in range(iota + 1, k2 + 1):
        if avals[k] >= H:
            tau = k
            break
    a_before = avals[tau - 1] if tau - 1 >= iota + 1 else 0.0
    kappa = float("nan")
    estimate = 0.0
    if gamma_ok:
        jump = y[tau - 1] ** 2
        kappa = math.sqrt((H - a_before) / jump)
        head = 0.0
        for j in range(iota + 1, tau):
            head += y[j - 1] * y[j]
        estimate = (head + kappa * y[tau - 1] * y[tau]) / H
    return {"tau": tau, "a_before": a_before, "kappa": kappa,
            "gamma_ok": gamma_ok, "estimate": estimate}


def ref_point_procedure(y, k1, k2, iota, eps_t):
    pilot, degenerate = ref_pilot(y, k1, iota)
    proj = min(max(pilot, -1.0 + eps_t), 1.0 - eps_t)
    gamma_tilde = 1.0 - proj * proj
    H = (1.0 - eps_t) * (k2 - iota - 1) / gamma_tilde
    out = ref_stopping_stage(y, iota, k2, H)
    out.update({"pilot": pilot, "proj": proj, "gamma_tilde": gamma_tilde,
                "H": H, "degenerate": degenerate})
    return out


def ref_eta(y, xi, iota, k2, H):
    """Always-defined noise variable for one window, given its threshold."""
    sq = math.sqrt(H)

    def qc(j):
        return y[j - 1] if j < k2 else sq

    acc = 0.0
    avals = {}
    for k in range(iota + 1, k2 + 1):
        acc += qc(k) ** 2
        avals[k] = acc
    tau = k2
    for k in range(iota + 1, k2 + 1):
        if avals[k] >= H:
            tau = k
            break
    a_before = avals[tau - 1] if tau - 1 >= iota + 1 else 0.0
    kappa = math.sqrt((H - a_before) / qc(tau) ** 2)
    head = 0.0
    for j in range(iota + 1, tau):
        head += qc(j) * xi[j - 1]
    eta = (head + kappa * qc(tau) * xi[tau - 1]) / H
    return {"eta": eta, "tau": tau, "kappa": kappa}


def ref_varpi(y, svals, s_at_z, iota, tau, kappa, H):
    """Bias terms for one successful window (svals[k-1] = S(x_k))."""
    v1 = 0.0
    for j in range(iota + 1, tau):
        v1 += y[j - 1] ** 2 * (svals[j - 1] - s_at_z)
    v1 += kappa ** 2 * y[tau - 1] ** 2 * (svals[tau - 1] - s_at_z)
    v1 /= H
    v2 = (kappa - kappa ** 2) * y[tau - 1] ** 2 * svals[tau - 1] / H
    return v1, v2


def ref_xi_star(y, xi, iota, tau, kappa, H):
    head = 0.0
    for j in range(iota + 1, tau):
        head += y[j - 1] * xi[j - 1]
    return (head + kappa * y[tau - 1] * xi[tau - 1]) / H
