"""Fast integrals of power-weighted Poisson tails against Pareto densities.

Computes I(z) = E[V^rho * psi_tau(V)(V z)] for V ~ Par(beta, 1), where
tau(v) = max(2, round(alpha * v^gamma)) is a power threshold rule.  A naive
quadrature must resolve every jump of tau; at small z the Poisson
transition region can straddle millions of jumps.  Instead:

* while the saturated region starts below the 3000th jump, every tau
  segment is integrated exactly (6-point Gauss-Legendre per segment);
* otherwise: small-tau segments (tau <= 40) get exact nodes; the region
  where the Poisson mean is far below tau contributes nothing (Chernoff
  bound, margin 8.5 sqrt(lambda) + 5 keeps the neglected mass < 1e-13);
  the transition window is summed jump by jump using the exact Pareto
  mass of each segment times the tail probability at its centroid; and
  beyond the saturation frontier psi = 1 up to 3e-16, leaving an analytic
  Pareto tail moment.

Validated against piecewise adaptive quadrature to ~1e-12 relative.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import brentq
from scipy.special import pdtrc

__all__ = ["par_tail_moment", "windowed_psi_moment"]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def par_tail_moment(a: float, b: float, beta: float, rho: float) -> float:
    """integral_a^b v^rho (beta-1) v^-beta dv for V ~ Par(beta, 1)."""
    e = beta - 1.0 - rho
    if e <= 0:
        raise ValueError("moment diverges: need rho < beta - 1")
    hi = 0.0 if np.isinf(b) else b ** (-e)
    return (beta - 1.0) / e * (a ** (-e) - hi)


def _tau_of(v, alpha, gamma, rounding):
    x = alpha * np.asarray(v, dtype=float) ** gamma
    t = np.floor(x) if rounding == "floor" else np.ceil(x)
    return np.maximum(2.0, t)


def _brk(j, alpha, gamma):
    """v where alpha v^gamma = j."""
    return (j / alpha) ** (1.0 / gamma)


def windowed_psi_moment(z: float, alpha: float, gamma: float, beta: float,
                        rho: float, rounding: str = "floor",
                        vcap: float = np.inf) -> float:
    """E[V^rho psi_tau(V)(V z) 1{V <= vcap}], V ~ Par(beta, 1)."""
    if z <= 0.0:
        return 0.0
    if gamma <= 0.0:
        raise ValueError("power rule needs gamma > 0 (use a constant rule otherwise)")

    def seg(w0, w1, tau):
        ws = w0 + (w1 - w0) * _GL_X
        nodes.append(ws)
        wts.append((w1 - w0) * _GL_W * (beta - 1.0) * ws ** (rho - beta))
        taus.append(np.full(6, tau))

    # saturation frontier: smallest v with vz - tau(v) > 8.5 sqrt(vz) + 5
    def sat(v):
        lam = v * z
        return lam - alpha * v ** gamma - 8.5 * np.sqrt(lam) - 5.0

    hi = 2.0
    while sat(hi) < 0.0 and hi < 1e300:
        hi *= 4.0
    v_sat = brentq(sat, 1.0, hi, xtol=1e-9, rtol=1e-12) if sat(1.0) < 0.0 else 1.0
    v_sat = min(v_sat, vcap)
    tau_sat = int(_tau_of(v_sat, alpha, gamma, rounding))

    nodes, wts, taus = [], [], []
    off = 0 if rounding == "floor" else -1  # segment [brk(j+off), brk(j+1+off)) has tau=j
    if tau_sat <= 3000:
        j = 2
        v_lo = 1.0
        while v_lo < v_sat:
            v_hi = min(max(_brk(j + 1 + off, alpha, gamma), v_lo), v_sat)
            if v_hi > v_lo:
                seg(v_lo, v_hi, j)
            v_lo = v_hi
            j += 1
            if j > tau_sat + 2:
                break
    else:
        small_tau_max = 40
        j = 2
        v_lo = 1.0
        while True:
            v_hi = max(_brk(j + 1 + off, alpha, gamma), v_lo)
            if j >= small_tau_max or v_hi >= v_sat:
                v_hi = min(v_hi, v_sat)
                if v_hi > v_lo:
                    seg(v_lo, v_hi, j)
                break
            if v_hi > v_lo:
                seg(v_lo, v_hi, j)
            v_lo = v_hi
            j += 1

        # transition window: between "tau far above the mean" and saturation
        def far_below(v):
            lam = v * z
            return alpha * v ** gamma - lam - 8.5 * np.sqrt(lam) - 5.0

        wl = _brk(small_tau_max, alpha, gamma)
        v_win = brentq(far_below, wl, v_sat, xtol=1e-9, rtol=1e-12) \
            if far_below(wl) > 0.0 else wl
        j0 = int(_tau_of(v_win, alpha, gamma, rounding))
        js = np.arange(max(j0, small_tau_max), tau_sat + 2)
        left = np.clip(_brk(js + off, alpha, gamma), v_win, v_sat)
        right = np.clip(_brk(js + 1 + off, alpha, gamma), v_win, v_sat)
        keep = right > left
        if np.any(keep):
            bl, br, jj = left[keep], right[keep], js[keep]
            e = beta - 1.0 - rho
            mass = (beta - 1.0) / e * (bl ** (-e) - br ** (-e))
            nodes.append(0.5 * (bl + br))
            wts.append(mass)
            taus.append(jj.astype(float))

    total = 0.0
    if nodes:
        vs = np.concatenate(nodes)
        wt = np.concatenate(wts)
        tt = np.concatenate(taus)
        total = float(np.sum(wt * pdtrc(tt - 1.0, vs * z)))
    if v_sat < vcap:
        total += par_tail_moment(v_sat, vcap, beta, rho)
    return total
