"""Limit functions f, g and their joint roots.

Coordinates: ``z`` is an (R, T, T) grid — ``z[r, a, b]`` is the per-capita
defaulted out-weight sent along relation r+1 toward type a by institutions
of type b — and ``chi`` is an (M,) vector of per-capita sold value per
asset.  For an institution of type ``a`` the relation-s default-arrival
rate is ``sum_b in_w[s, b] * z[s, a, b]``; its solvency threshold is
``capital - loss - holdings . h(chi)``.

``f`` maps a candidate (z, chi) to the residual of the self-consistency
system; its smallest joint root (via the left-continuous modification)
lower-bounds the final cascade state, the largest root of the
epsilon-relaxed system upper-bounds it, and ``g`` turns either root into
expected systemic damage per institution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .laws import (FinitaryLaw, OutWeightMark, ParetoLaw, ConstMark,
                   PowerMark, ShockedLaw, _adaptive_simpson, _tail_integral,
                   _TAIL_FLOOR, _TAIL_H)
from .poisson import (WeightedPoissonSpec, phi_general, psi_general, psi_tail,
                      weighted_sum_pmf)
from .powerint import par_tail_moment, windowed_psi_moment
from .rules import ConstCapital, PowerThreshold
from .systems import eval_impact, eval_sale

__all__ = [
    "eval_f", "eval_g", "smallest_root", "largest_root_P0",
    "directional_derivative", "threshold_law_from_exposures",
    "FixedPointReport", "fixed_point_report",
]

_STEP_TOL = 1e-10
_MAX_ITER = 100_000
_EPS_LEVELS = tuple(1e-2 * 2.0 ** (-k) for k in range(21))


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _norm_point(law, z, chi):
    r, t, m = law.dims
    zz = np.zeros((r, t, t)) if z is None else \
        np.array(np.broadcast_to(np.asarray(z, dtype=float), (r, t, t)))
    cc = np.zeros(m) if chi is None else np.asarray(chi, dtype=float).reshape(m)
    if np.any(zz < 0) or np.any(cc < 0):
        raise ValueError("z and chi must be nonnegative")
    return zz, cc


def _impact_vec(impact, chi, m):
    if m == 0:
        return np.zeros(0)
    return np.asarray(eval_impact(impact, chi), dtype=float).reshape(m)


def _sale_for(sale, inst_type: int):
    if isinstance(sale, (tuple, list)):
        return sale[inst_type]
    return sale


def _threshold_index(t, strict):
    """Integer tail index l with psi = P(Y >= l); strict variant P(Y > t)."""
    t = np.asarray(t, dtype=float)
    l = np.ceil(t)
    if np.any(strict):
        isint = np.isclose(t, np.round(t), atol=1e-9, rtol=0.0)
        l = np.where(strict & isint, np.floor(t) + 1.0, l)
    return l


def _phi_r1(rates, loss, capital, sale, left):
    """E[rho((Poi(rate) + loss)/capital)], vectorized over nodes (R = 1)."""
    rates = np.atleast_1d(np.asarray(rates, dtype=float))
    loss = np.broadcast_to(np.asarray(loss, dtype=float), rates.shape)
    capital = np.broadcast_to(np.asarray(capital, dtype=float), rates.shape)
    out = np.zeros(rates.shape)
    fin = np.isfinite(capital)
    if not np.any(fin):
        return out
    if np.any(capital[fin] <= 0):
        raise ValueError("capital must be positive or +inf")
    kcap = np.ceil(np.maximum(capital - loss, 0.0))
    kcap_max = int(np.max(kcap[fin]))
    if kcap_max > 20_000:
        raise ValueError("sale-moment truncation too large; rescale capital units")
    ks = np.arange(kcap_max + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logr = np.where(rates > 0, np.log(np.where(rates > 0, rates, 1.0)), -np.inf)
        logpmf = ks[None, :] * logr[:, None] - rates[:, None] - _GAMMALN[ks + 1][None, :]
        pmf = np.exp(logpmf)
    pmf[rates == 0] = 0.0
    pmf[rates == 0, 0] = 1.0
    ratio = (ks[None, :] + loss[:, None]) / capital[:, None]
    vals = eval_sale(sale, ratio.ravel(), left_continuous=left).reshape(ratio.shape)
    head_mask = ks[None, :] <= kcap[:, None]
    head = np.sum(pmf * vals * head_mask, axis=1)
    tail = np.clip(1.0 - np.sum(pmf * head_mask, axis=1), 0.0, 1.0)
    top = eval_sale(sale, 2.0, left_continuous=left)
    out[fin] = (head + tail * top)[fin]
    return out


_GAMMALN = gammaln(np.arange(20_002).astype(float))


def _mark_mean(law: ParetoLaw, rule) -> float:
    """Closed-form E[mark] for a Pareto law."""
    if isinstance(rule, ConstMark):
        return rule.v
    if isinstance(rule, OutWeightMark):
        return law.mean_out()
    if isinstance(rule, PowerMark):
        e = rule.exponent
        if e >= law.beta_minus - 1.0:
            raise ValueError("mark mean diverges: exponent too large")
        return rule.coef * law.wmin_minus ** e * (law.beta_minus - 1.0) / \
            (law.beta_minus - 1.0 - e)
    raise TypeError(f"unknown mark rule {rule!r}")


# ---------------------------------------------------------------------------
# finitary evaluation
# ---------------------------------------------------------------------------

def _finitary_parts(law: FinitaryLaw, z, chi, left):
    view = law.class_view()
    k = len(law.classes)
    r, t, m = law.dims
    h = _impact_vec(law.impact, chi, m)
    if left and m and np.any(chi > 0):
        h_lo = _impact_vec(law.impact, chi * (1.0 - 1e-9), m)
        moving = (view.holdings @ np.maximum(h - h_lo, 0.0)) > 0
    else:
        moving = np.zeros(k, dtype=bool)
    xh = view.holdings @ h if m else np.zeros(k)
    thr = view.capital - view.loss - xh
    # rates[j, s] = sum_b in_w[j, s, b] * z[s, type_j, b]
    rates = np.einsum("krt,krt->kr", view.in_w, z[:, view.inst_type, :].transpose(1, 0, 2))
    if r == 1:
        psi = psi_tail(rates[:, 0], _threshold_index(thr, moving))
    else:
        psi = np.empty(k)
        for j in range(k):
            psi[j] = psi_general(WeightedPoissonSpec(tuple(rates[j])), thr[j],
                                 strict=bool(moving[j]))
    phi = np.zeros((k, m))
    if m:
        for j in range(k):
            if not view.holdings[j].any():
                continue
            sale_j = _sale_for(law.sale, int(view.inst_type[j]))
            if r == 1:
                val = float(_phi_r1(rates[j, 0], view.loss[j] + xh[j],
                                    view.capital[j], sale_j, left)[0])
            else:
                val = phi_general(WeightedPoissonSpec(tuple(rates[j])),
                                  view.loss[j] + xh[j], view.capital[j],
                                  sale_j, left)
            phi[j] = view.holdings[j] * val
    return view, psi, phi


def _finitary_f(law: FinitaryLaw, z, chi, left):
    view, psi, phi = _finitary_parts(law, z, chi, left)
    r, t, m = law.dims
    fz = np.zeros((r, t, t))
    wpsi = view.weight * psi
    for b in range(t):
        sel = view.inst_type == b
        if np.any(sel):
            fz[:, :, b] = np.einsum("k,kra->ra", wpsi[sel], view.out_w[sel])
    fchi = view.weight @ phi if m else np.zeros(0)
    return fz - z, fchi - chi


def _finitary_g(law: FinitaryLaw, z, chi, left):
    view, psi, _ = _finitary_parts(law, z, chi, left)
    return float(np.dot(view.weight, view.importance * psi))


# ---------------------------------------------------------------------------
# Pareto (single-type) evaluation
# ---------------------------------------------------------------------------

def _pareto_hint_edges(law: ParetoLaw, z, chi, shock):
    """Known integrand kinks: sale/threshold corners and the shock cut.

    Returned as two lists: ``u`` positions for the main adaptive region and
    upper-tail masses ``t = 1 - u`` for the tail ladder, so corners landing
    deep in the tail (tiny fire-sale impact pushes them out) stay resolved.
    """
    t_corners = []
    bm = law.beta_minus
    if isinstance(shock, ShockedLaw) and shock.kind == "largest":
        t_corners.append(shock.p)
    if isinstance(law.capital_rule, PowerThreshold) and z > 0:
        a_eff = law.capital_rule.alpha * law.wmin_minus ** law.capital_rule.gamma
        for j in range(2, 600):
            v = (j / a_eff) ** (1.0 / max(law.capital_rule.gamma, 1e-12))
            t = v ** (-(bm - 1.0))
            if t <= _TAIL_FLOOR:
                break
            if t < 1.0:
                t_corners.append(t)
    if isinstance(law.capital_rule, ConstCapital) and law.dims[2] >= 1 \
            and len(law.holdings_rule) == 1 and isinstance(law.holdings_rule[0], PowerMark):
        hr = law.holdings_rule[0]
        h = _impact_vec(law.impact, np.asarray(chi, dtype=float).reshape(-1), law.dims[2])
        xh_coef = hr.coef * float(h.sum())
        if xh_coef > 0:
            c = law.capital_rule.v
            for kk in range(int(math.floor(c)) + 1):
                w = ((c - kk) / xh_coef) ** (1.0 / hr.exponent)
                if w > law.wmin_minus:
                    t = (w / law.wmin_minus) ** (-(bm - 1.0))
                    if t > _TAIL_FLOOR:
                        t_corners.append(t)
    u_edges = [1.0 - t for t in t_corners if t > _TAIL_H and t < 1.0]
    t_edges = [t for t in t_corners if t <= _TAIL_H]
    return u_edges, t_edges


def _pareto_component(law: ParetoLaw, shock, z, chi, left, kind, m_index=0,
                      tol=1e-9):
    """One integral component: kind in {'fz', 'g', 'fchi'}.

    Folds the shock: uniform mixes the unshocked integral with the
    defaulted-top mean; largest switches the integrand at u = 1 - p.
    """
    zz = float(z)
    mmax = law.dims[2]
    p = shock.p if isinstance(shock, ShockedLaw) else 0.0
    kind_largest = isinstance(shock, ShockedLaw) and shock.kind == "largest"
    kind_uniform = isinstance(shock, ShockedLaw) and shock.kind == "uniform"
    independent = law.dependence == "independent"

    # fast path: power-threshold rule, pure default contagion
    if kind in ("fz", "g") and mmax == 0 and zz > 0.0 \
            and isinstance(law.capital_rule, PowerThreshold) \
            and law.capital_rule.floor == 2:
        rule = law.capital_rule
        if kind == "fz":
            rho = 0.0 if independent else law.coupling_exponent
            scale = law.mean_out() if independent else law.wmin_plus
        else:
            ir = law.importance_rule
            if isinstance(ir, OutWeightMark):
                rho = 0.0 if independent else law.coupling_exponent
                scale = law.mean_out() if independent else law.wmin_plus
            elif isinstance(ir, ConstMark):
                rho, scale = 0.0, ir.v
            elif isinstance(ir, PowerMark):
                rho, scale = ir.exponent, ir.coef * law.wmin_minus ** ir.exponent
            else:
                raise TypeError(f"unknown mark rule {ir!r}")
        a_eff = rule.alpha * law.wmin_minus ** rule.gamma
        z_eff = zz * law.wmin_minus
        if kind_largest:
            vq = p ** (-1.0 / (law.beta_minus - 1.0))
            body = windowed_psi_moment(z_eff, a_eff, rule.gamma, law.beta_minus,
                                       rho, rule.rounding, vcap=vq)
            top = par_tail_moment(vq, np.inf, law.beta_minus, rho)
            return scale * (body + top)
        body = scale * windowed_psi_moment(z_eff, a_eff, rule.gamma,
                                           law.beta_minus, rho, rule.rounding)
        if kind_uniform:
            top = scale * par_tail_moment(1.0, np.inf, law.beta_minus, rho)
            return (1.0 - p) * body + p * top
        return body

    chi = np.asarray(chi, dtype=float).reshape(mmax)
    h = _impact_vec(law.impact, chi, mmax)
    if left and mmax and np.any(chi > 0):
        h_lo = _impact_vec(law.impact, chi * (1.0 - 1e-9), mmax)
        dh = np.maximum(h - h_lo, 0.0)
    else:
        dh = np.zeros(mmax)
    rho_top = float(eval_sale(_sale_for(law.sale, 0), 2.0))

    def node_values(w):
        view = law.view_at(w)
        xh = view.holdings @ h if mmax else np.zeros(w.size)
        thr = view.capital - view.loss - xh
        moving = (view.holdings @ dh) > 0 if mmax else np.zeros(w.size, dtype=bool)
        rates = w * zz
        if kind == "fz":
            psi = psi_tail(rates, _threshold_index(thr, moving))
            if independent:
                return psi  # times mean_out outside
            return view.w_plus * psi
        if kind == "g":
            psi = psi_tail(rates, _threshold_index(thr, moving))
            if independent and isinstance(law.importance_rule, OutWeightMark):
                return psi  # times mean_out outside
            return view.importance * psi
        val = _phi_r1(rates, view.loss + xh, view.capital,
                      _sale_for(law.sale, 0), left)
        return view.holdings[:, m_index] * val

    def top_values(w):
        view = law.view_at(w)
        if kind == "fz":
            return np.ones(w.size) if independent else view.w_plus
        if kind == "g":
            if independent and isinstance(law.importance_rule, OutWeightMark):
                return np.ones(w.size)
            return view.importance
        return view.holdings[:, m_index] * rho_top

    factor = 1.0
    if independent and (kind == "fz" or (kind == "g" and
                        isinstance(law.importance_rule, OutWeightMark))):
        factor = law.mean_out()

    if kind_largest:
        ucut = 1.0 - p

        def g_int(u):
            w = law.quantile_in(u)
            out = np.empty(u.size)
            lo = u <= ucut
            if np.any(lo):
                out[lo] = node_values(w[lo])
            if np.any(~lo):
                out[~lo] = top_values(w[~lo])
            return out

        def g_tail(t):
            w = law.quantile_in_tail(t)
            out = np.empty(t.size)
            deep = t < p
            if np.any(deep):
                out[deep] = top_values(w[deep])
            if np.any(~deep):
                out[~deep] = node_values(w[~deep])
            return out
    else:
        def g_int(u):
            return node_values(law.quantile_in(u))

        def g_tail(t):
            return node_values(law.quantile_in_tail(t))

    u_edges, t_edges = _pareto_hint_edges(law, zz, chi, shock)
    main = _adaptive_simpson(g_int, 0.0, 1.0 - _TAIL_H, tol, edges_hint=u_edges)
    total = factor * (main + _tail_integral(g_tail, edges=t_edges))
    if kind_uniform:
        if kind == "fz":
            top = law.mean_out()
        elif kind == "g":
            top = _mark_mean(law, law.importance_rule)
        else:
            top = _mark_mean(law, law.holdings_rule[m_index]) * rho_top
        return (1.0 - p) * total + p * top
    return total


def _pareto_f(law: ParetoLaw, shock, z, chi, left):
    r, t, m = law.dims
    zz = float(z.reshape(()))
    fz = np.array(_pareto_component(law, shock, zz, chi, left, "fz")).reshape(1, 1, 1)
    fchi = np.array([_pareto_component(law, shock, zz, chi, left, "fchi", mi)
                     for mi in range(m)])
    return fz - z, fchi - chi


# ---------------------------------------------------------------------------
# public evaluation
# ---------------------------------------------------------------------------

def _split(law):
    """(base law, shock wrapper or None)."""
    if isinstance(law, ShockedLaw):
        if isinstance(law.base, FinitaryLaw):
            return law.fold_finitary(), None
        return law.base, law
    return law, None


def eval_f(law, z=None, chi=None, left_continuous: bool = False):
    """Residuals (f_z - z, f_chi - chi) of the self-consistency system."""
    base, shock = _split(law)
    z, chi = _norm_point(base, z, chi)
    if isinstance(base, FinitaryLaw):
        return _finitary_f(base, z, chi, left_continuous)
    if isinstance(base, ParetoLaw):
        return _pareto_f(base, shock, z, chi, left_continuous)
    raise TypeError(f"unknown law {law!r}")


def eval_g(law, z=None, chi=None, left_continuous: bool = False) -> float:
    """Expected systemic damage per institution at (z, chi)."""
    base, shock = _split(law)
    z, chi = _norm_point(base, z, chi)
    if isinstance(base, FinitaryLaw):
        return _finitary_g(base, z, chi, left_continuous)
    if isinstance(base, ParetoLaw):
        return float(_pareto_component(base, shock, float(z.reshape(())), chi,
                                       left_continuous, "g"))
    raise TypeError(f"unknown law {law!r}")


def _coordinate_scales(law):
    """Per-coordinate size of the root box: E[W+ 1{A=b}] and E[X^m]."""
    base, shock = _split(law)
    if isinstance(base, FinitaryLaw):
        view = base.class_view()
        r, t, m = base.dims
        sz = np.zeros((r, t, t))
        for b in range(t):
            sel = view.inst_type == b
            if np.any(sel):
                sz[:, :, b] = np.einsum("k,kra->ra", view.weight[sel], view.out_w[sel])
        sc = view.weight @ view.holdings if m else np.zeros(0)
        return sz, sc
    r, t, m = base.dims
    sz = np.full((r, t, t), base.mean_out())
    sc = np.array([_mark_mean(base, base.holdings_rule[mi]) for mi in range(m)])
    return sz, sc


def smallest_root(law):
    """Smallest joint root of the left-continuous system, from (0, 0) up."""
    base, _ = _split(law)
    z, chi = _norm_point(base, None, None)
    for _ in range(_MAX_ITER):
        fz, fchi = eval_f(law, z, chi, left_continuous=True)
        z2, chi2 = z + fz, chi + fchi
        step = max(np.max(np.abs(z2 - z), initial=0.0),
                   np.max(np.abs(chi2 - chi), initial=0.0))
        z, chi = z2, chi2
        if step < _STEP_TOL:
            break
    return z, chi


def _relaxed_root(law, eps, z0, chi0, active_z, active_chi):
    z, chi = z0.copy(), chi0.copy()
    for _ in range(_MAX_ITER):
        fz, fchi = eval_f(law, z, chi, left_continuous=False)
        z2 = np.where(active_z, np.maximum(z + fz + eps, 0.0), 0.0)
        chi2 = np.where(active_chi, np.maximum(chi + fchi + eps, 0.0), 0.0) \
            if chi.size else chi
        step = max(np.max(np.abs(z2 - z), initial=0.0),
                   np.max(np.abs(chi2 - chi), initial=0.0))
        z, chi = z2, chi2
        if step < _STEP_TOL:
            break
    return z, chi


def largest_root_P0(law, return_detail: bool = False):
    """Largest root reachable from 0 via the epsilon-relaxation schedule."""
    base, _ = _split(law)
    scale_z, scale_chi = _coordinate_scales(law)
    active_z, active_chi = scale_z > 0, scale_chi > 0
    z, chi = _norm_point(base, None, None)
    seq = []
    for eps in _EPS_LEVELS:
        z, chi = _relaxed_root(law, eps, z, chi, active_z, active_chi)
        seq.append((z.copy(), chi.copy()))
        if len(seq) >= 2:
            pz, pc = seq[-2]
            if np.any(z > pz + 1e-7 * (1.0 + scale_z)) or \
                    (chi.size and np.any(chi > pc + 1e-7 * (1.0 + scale_chi))):
                raise RuntimeError("epsilon-relaxation sequence is not monotone; "
                                   "check solver tolerances")
    raw_z, raw_chi = seq[-1]
    prev_z, prev_chi = seq[-2]
    ext_z = np.maximum(2.0 * raw_z - prev_z, 0.0)
    ext_chi = np.maximum(2.0 * raw_chi - prev_chi, 0.0) if raw_chi.size else raw_chi
    zero = np.all(raw_z <= 1e-6 * np.maximum(scale_z, 1e-300)) and \
        (not raw_chi.size or np.all(raw_chi <= 1e-6 * np.maximum(scale_chi, 1e-300)))
    if zero:
        ext_z, ext_chi = np.zeros_like(raw_z), np.zeros_like(raw_chi)
    if return_detail:
        return ext_z, ext_chi, {"raw_z": raw_z, "raw_chi": raw_chi,
                                "epsilon_schedule": _EPS_LEVELS,
                                "declared_zero": bool(zero)}
    return ext_z, ext_chi


# ---------------------------------------------------------------------------
# directional derivatives
# ---------------------------------------------------------------------------

def directional_derivative(law, z=None, chi=None, vz=None, vchi=None):
    """D_v of the residual maps at (z, chi); returns (dz, dchi, reliable).

    Finitary laws with a pure z-direction use the exact jump-window form
    P(Y in [thr - s, thr - 1]) per relation weight s; everything else falls
    back to central differences with a two-step reliability check.
    """
    base, shock = _split(law)
    z, chi = _norm_point(base, z, chi)
    r, t, m = base.dims
    vz = np.zeros((r, t, t)) if vz is None else \
        np.array(np.broadcast_to(np.asarray(vz, dtype=float), (r, t, t)))
    vchi = np.zeros(m) if vchi is None else np.asarray(vchi, dtype=float).reshape(m)
    if np.any(vz < 0) or np.any(vchi < 0):
        raise ValueError("direction must be nonnegative")

    if isinstance(base, FinitaryLaw) and shock is None and not vchi.any():
        view = base.class_view()
        k = len(base.classes)
        h = _impact_vec(base.impact, chi, m)
        xh = view.holdings @ h if m else np.zeros(k)
        thr = view.capital - view.loss - xh
        rates = np.einsum("krt,krt->kr", view.in_w,
                          z[:, view.inst_type, :].transpose(1, 0, 2))
        drates = np.einsum("krt,krt->kr", view.in_w,
                           vz[:, view.inst_type, :].transpose(1, 0, 2))
        dpsi = np.zeros(k)
        for j in range(k):
            if not np.isfinite(thr[j]):
                continue
            l = int(np.ceil(thr[j]))
            if l <= 0:
                continue
            spec = WeightedPoissonSpec(tuple(rates[j]))
            pmf, _ = weighted_sum_pmf(spec, l - 1)
            for s in range(1, r + 1):
                if drates[j, s - 1] == 0.0:
                    continue
                window = pmf[max(l - s, 0): l].sum()
                dpsi[j] += drates[j, s - 1] * window
        dz = np.zeros((r, t, t))
        wd = view.weight * dpsi
        for b in range(t):
            sel = view.inst_type == b
            if np.any(sel):
                dz[:, :, b] = np.einsum("k,kra->ra", wd[sel], view.out_w[sel])
        return dz - vz, np.zeros(m), True

    norm = max(float(np.max(np.abs(vz), initial=0.0)),
               float(np.max(np.abs(vchi), initial=0.0)), 1e-300)
    h0 = 1e-5 / norm
    interior = np.all(z - h0 * vz >= 0) and np.all(chi - h0 * vchi >= 0)
    f0 = None if interior else eval_f(law, z, chi)
    out = []
    for hstep in (h0, h0 / 2.0):
        fp = eval_f(law, z + hstep * vz, chi + hstep * vchi)
        if interior:
            fm = eval_f(law, z - hstep * vz, chi - hstep * vchi)
            denom = 2.0 * hstep
        else:
            fm = f0  # one-sided at the boundary of the nonnegative orthant
            denom = hstep
        out.append(((fp[0] - fm[0]) / denom, (fp[1] - fm[1]) / denom))
    (d1z, d1c), (d2z, d2c) = out
    scale = max(float(np.max(np.abs(d2z), initial=0.0)),
                float(np.max(np.abs(d2c), initial=0.0)), 1e-12)
    agree = (np.max(np.abs(d1z - d2z), initial=0.0) <= 1e-3 * scale and
             np.max(np.abs(d1c - d2c), initial=0.0) <= 1e-3 * scale)
    return d2z, d2c, bool(agree)


# ---------------------------------------------------------------------------
# empirical threshold laws
# ---------------------------------------------------------------------------

def threshold_law_from_exposures(law, exposure_spec, samples: int, seed: int):
    """Replace monetary capitals by Monte Carlo count thresholds.

    For each class, simulates running sums of i.i.d. exposures and records
    the first count at which the sum reaches the class capital; returns a
    finitary law whose capitals are those counts with empirical weights.
    """
    from .networks import sample_exposures
    from .laws import VertexClass

    if samples < 10_000:
        raise ValueError("need at least 1e4 samples for the threshold law")
    if not isinstance(law, FinitaryLaw):
        raise TypeError("threshold estimation needs a finitary law")
    from .rng import substream
    rng = substream(seed, "thresholds")
    new_classes = []
    for ci, c in enumerate(law.classes):
        if not np.isfinite(c.capital):
            new_classes.append(c)
            continue
        remaining = np.full(samples, c.capital, dtype=float)
        count = np.zeros(samples, dtype=np.int64)
        alive = remaining > 0
        while np.any(alive):
            draw = sample_exposures(exposure_spec, rng, int(alive.sum()))
            remaining[alive] -= draw
            count[alive] += 1
            alive = remaining > 0
        values, mult = np.unique(count, return_counts=True)
        for v, mlt in zip(values, mult):
            new_classes.append(VertexClass(
                prob=c.prob * (mlt / samples), in_weights=c.in_weights,
                out_weights=c.out_weights, holdings=c.holdings,
                importance=c.importance, capital=float(v), loss=c.loss,
                inst_type=c.inst_type))
    return FinitaryLaw(classes=tuple(new_classes), sale=law.sale, impact=law.impact)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

@dataclass
class FixedPointReport:
    z_hat: np.ndarray
    chi_hat: np.ndarray
    z_star: np.ndarray
    chi_star: np.ndarray
    z_star_raw: np.ndarray
    chi_star_raw: np.ndarray
    g_lower: float
    g_upper: float
    residual_hat: float
    residual_star: float
    epsilon_schedule: tuple
    verdict_hint: str

    def to_dict(self) -> dict:
        return {
            "z_hat": self.z_hat.tolist(), "chi_hat": self.chi_hat.tolist(),
            "z_star": self.z_star.tolist(), "chi_star": self.chi_star.tolist(),
            "z_star_raw": self.z_star_raw.tolist(),
            "chi_star_raw": self.chi_star_raw.tolist(),
            "g_lower": self.g_lower, "g_upper": self.g_upper,
            "residual_hat": self.residual_hat, "residual_star": self.residual_star,
            "epsilon_schedule": list(self.epsilon_schedule),
            "verdict_hint": self.verdict_hint,
        }


def _mean_importance(law) -> float:
    base, shock = _split(law)
    if isinstance(base, FinitaryLaw):
        view = base.class_view()
        return float(np.dot(view.weight, view.importance))
    return _mark_mean(base, base.importance_rule)


def fixed_point_report(law) -> FixedPointReport:
    z_hat, chi_hat = smallest_root(law)
    z_star, chi_star, detail = largest_root_P0(law, return_detail=True)
    fz, fchi = eval_f(law, z_hat, chi_hat, left_continuous=True)
    res_hat = max(np.max(np.abs(fz), initial=0.0), np.max(np.abs(fchi), initial=0.0))
    fz, fchi = eval_f(law, detail["raw_z"], detail["raw_chi"])
    res_star = max(np.max(np.abs(fz), initial=0.0), np.max(np.abs(fchi), initial=0.0))
    g_lower = eval_g(law, z_hat, chi_hat, left_continuous=True)
    g_upper = eval_g(law, z_star, chi_star)
    tol_g = 1e-8 * max(_mean_importance(law), 1e-300)
    if detail["declared_zero"] or g_upper < tol_g:
        hint = "resilient"
    elif g_lower > tol_g:
        hint = "non_resilient"
    else:
        hint = "undetermined"
    return FixedPointReport(
        z_hat=z_hat, chi_hat=chi_hat, z_star=z_star, chi_star=chi_star,
        z_star_raw=detail["raw_z"], chi_star_raw=detail["raw_chi"],
        g_lower=float(g_lower), g_upper=float(g_upper),
        residual_hat=float(res_hat), residual_star=float(res_star),
        epsilon_schedule=detail["epsilon_schedule"], verdict_hint=hint,
    )
