"""Resilience classification and capital-requirement calculators.

Verdicts come from the limit fixed points: a system is resilient when the
largest small-shock root is null (no macroscopic damage from vanishing
shocks) and non-resilient when the damage functional is strictly positive
there.  The calculators invert that logic: given tail exponents they return
the critical capital exponents, buffer sizes, or linear coefficients that
place a system on the resilient side.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import quad

from .fixedpoint import (_EPS_LEVELS, _MAX_ITER, _STEP_TOL, _coordinate_scales,
                         _mean_importance, _norm_point, _split,
                         directional_derivative, eval_f, eval_g,
                         largest_root_P0)
from .laws import FinitaryLaw, ParetoLaw, ShockedLaw, expect
from .rules import (Combined, ConstCapital, HoldingsLinear, MultiTypePower,
                    PowerThreshold, RobustLargest, eval_capital_rule)
from .systems import (CrossImpact, LinearImpact, LogLinearImpact,
                      PowerBoundedImpact, eval_impact)

__all__ = [
    "ResilienceVerdict", "classify",
    "contagion_exponents", "tail_dependence_integral",
    "MultiTypeExponents", "multitype_capital_exponents",
    "FireSalesCapital", "fire_sales_capital", "one_asset_fire_sales_exponents",
    "diversification_exponents", "overlap_exponents",
    "capital_requirement", "shock_buffer_search",
    "small_shock_amplification", "shock_on_subset", "SubsetRoot",
]

TOL_G = 1e-8        # damage tolerance, relative to E[S]
TOL_ZERO = 1e-6     # root-is-zero tolerance, relative to coordinate scale


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResilienceVerdict:
    """Outcome of :func:`classify` with the numbers that justify it.

    ``verdict`` is one of ``resilient``, ``non_resilient``, ``undetermined``;
    ``evidence`` names the criterion that fired (``z_star_zero``,
    ``derivative_sign``, ``g_positive``, or ``bracket_ambiguous``).
    """

    verdict: str
    evidence: str
    numbers: dict

    def __post_init__(self):
        if self.verdict not in ("resilient", "non_resilient", "undetermined"):
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.evidence not in ("z_star_zero", "derivative_sign",
                                 "g_positive", "bracket_ambiguous"):
            raise ValueError(f"unknown evidence {self.evidence!r}")

    def to_json(self) -> str:
        def clean(x):
            if isinstance(x, np.ndarray):
                return x.tolist()
            if isinstance(x, (np.floating, np.integer)):
                return float(x)
            return x
        return json.dumps({"verdict": self.verdict, "evidence": self.evidence,
                           "numbers": {k: clean(v) for k, v in self.numbers.items()}},
                          indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ResilienceVerdict":
        d = json.loads(text)
        return ResilienceVerdict(d["verdict"], d["evidence"], d["numbers"])


def _impact_strictly_increasing(impact, chi_box):
    """Check h^m is strictly increasing on the relevant box [0, E[X^m]].

    The parametric families are decided analytically (log-linear always is;
    the saturating families only below their caps); a generic cross impact
    is probed on a grid along each coordinate axis.
    """
    m = chi_box.size
    if m == 0:
        return True
    if isinstance(impact, LogLinearImpact):
        return True
    if isinstance(impact, LinearImpact):
        return bool(np.all(np.asarray(impact.mu) * chi_box < 1.0))
    if isinstance(impact, PowerBoundedImpact):
        mu, nu = np.asarray(impact.mu), np.asarray(impact.nu)
        return bool(np.all(mu * chi_box ** nu < 1.0))
    # generic: sample along each axis and require strict growth
    for j in range(m):
        ts = np.linspace(0.0, max(chi_box[j], 1e-12), 33)
        pts = np.zeros((33, m))
        pts[:, j] = ts
        vals = np.array([eval_impact(impact, p)[j] for p in pts])
        if np.any(np.diff(vals) <= 0.0):
            return False
    return True


def classify(law, tol_g: float = TOL_G, tol_zero: float = TOL_ZERO) -> ResilienceVerdict:
    """Resilience verdict for an unshocked law.

    Fast path: if the directional derivative of the residual maps at the
    origin is reliably negative in every coordinate along the all-ones
    direction, the null root is isolated and the law is resilient.  Otherwise
    the epsilon-relaxed largest root decides: a null root (within
    ``tol_zero`` x scale) or vanishing damage means resilient, strictly
    positive left-continuous damage means non-resilient (provided the price
    impact is strictly increasing so the lower bound carries), and anything
    between is left undetermined.
    """
    if isinstance(law, ShockedLaw):
        raise ValueError("classification applies to the unshocked law; "
                         "classify(shocked.base) instead")
    r, t, m = law.dims
    mean_s = _mean_importance(law)
    scale_z, scale_chi = _coordinate_scales(law)

    dz, dchi, reliable = directional_derivative(
        law, vz=np.ones((r, t, t)), vchi=np.ones(m) if m else None)
    if reliable and np.all(dz < 0.0) and (m == 0 or np.all(dchi < 0.0)):
        return ResilienceVerdict(
            "resilient", "derivative_sign",
            {"derivative_z": dz, "derivative_chi": dchi,
             "mean_importance": mean_s})

    z, chi, detail = largest_root_P0(law, return_detail=True)
    numbers = {"z_star": z, "chi_star": chi, "mean_importance": mean_s,
               "declared_zero": float(detail["declared_zero"])}
    if detail["declared_zero"]:
        return ResilienceVerdict("resilient", "z_star_zero", numbers)

    g_weak = eval_g(law, z, chi)
    g_left = eval_g(law, z, chi, left_continuous=True)
    numbers.update({"g": g_weak, "g_left": g_left})
    threshold = tol_g * max(mean_s, 1e-300)
    if g_weak < threshold:
        return ResilienceVerdict("resilient", "z_star_zero", numbers)
    if g_left > threshold:
        if m and not _impact_strictly_increasing(law.impact, scale_chi):
            numbers["impact_strictly_increasing"] = 0.0
            return ResilienceVerdict("undetermined", "bracket_ambiguous", numbers)
        return ResilienceVerdict("non_resilient", "g_positive", numbers)
    return ResilienceVerdict("undetermined", "bracket_ambiguous", numbers)


# ---------------------------------------------------------------------------
# threshold exponents (single type)
# ---------------------------------------------------------------------------

def tail_dependence_integral(dependence, beta_plus: float) -> float:
    """integral_0^inf Lambda(x^(1-beta_plus)) dx for the given dependence.

    Comonotone weights have Lambda(x) = min(1, x) and the closed form
    (beta_plus - 1)/(beta_plus - 2); independent weights have Lambda = 0.
    A callable is integrated numerically (split at the x = 1 kink).
    """
    if dependence == "comonotone":
        return (beta_plus - 1.0) / (beta_plus - 2.0)
    if dependence == "independent":
        return 0.0
    if not callable(dependence):
        raise ValueError("dependence must be 'comonotone', 'independent', "
                         "or a tail-dependence function")
    fn = lambda x: dependence(x ** (1.0 - beta_plus))
    head, _ = quad(fn, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13, limit=400)
    tail, _ = quad(fn, 1.0, np.inf, epsabs=1e-13, epsrel=1e-13, limit=400)
    return head + tail


def contagion_exponents(beta_minus, beta_plus, wmin_minus: float = 1.0,
                        wmin_plus: float = 1.0, dependence="comonotone"):
    """Critical exponent pair (gamma_c, alpha_c) for power thresholds.

    Thresholds tau(w) = max{2, ceil(alpha w^gamma)} make a Pareto-tailed
    system resilient when gamma > gamma_c, or gamma = gamma_c with
    alpha > alpha_c; below either critical value it is non-resilient.
    """
    if not (beta_minus > 2.0 and beta_plus > 2.0):
        raise ValueError("tail exponents must exceed 2")
    gamma_c = 2.0 + (beta_minus - 1.0) / (beta_plus - 1.0) - beta_minus
    # beta_plus > 2 forces gamma_c < 1; anything else is an arithmetic bug
    assert gamma_c < 1.0
    lam = tail_dependence_integral(dependence, beta_plus)
    alpha_c = wmin_plus * wmin_minus ** (1.0 - gamma_c) * lam
    return gamma_c, alpha_c


# ---------------------------------------------------------------------------
# multi-type threshold exponents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiTypeExponents:
    """Critical exponent grids over (relation, creditor type, debtor type).

    ``nu_c``/``mu_c`` hold the per-coordinate critical values; the per-type
    reductions take the maximum over (relation, creditor) and, for mu, over
    the coordinates attaining it.  ``v_optimal`` is the direction that
    equalizes mu_c across coordinates (lowest capitals overall).
    """

    nu_c: np.ndarray
    mu_c: np.ndarray
    nu_c_type: np.ndarray
    mu_c_type: np.ndarray
    v: np.ndarray
    v_optimal: np.ndarray

    def rule(self, margin: float = 1e-3, amplification=None,
             floor=None) -> MultiTypePower:
        """Sufficient capital rule from the critical pair.

        ``amplification`` bounds the damage blow-up of anticipated shocks by
        the factor B >= 1 via mu = mu_c / (1 - 1/B); otherwise mu exceeds
        mu_c by ``margin``.  nu is clipped at zero (a negative critical
        exponent means flat capitals suffice).
        """
        r = self.nu_c.shape[0]
        nu = np.maximum(self.nu_c_type, 0.0)
        mu = self.mu_c_type * (1.0 + margin)
        if amplification is not None:
            if not amplification > 1.0:
                raise ValueError("amplification bound must exceed 1")
            mu = np.maximum(mu, self.mu_c_type / (1.0 - 1.0 / amplification))
        mu = np.maximum(mu, 1e-12)  # mu_c can be 0 on fully inactive types
        return MultiTypePower(mu=tuple(mu), nu=tuple(nu), v=tuple(self.v.ravel()),
                              floor=r + 1 if floor is None else floor)


def multitype_capital_exponents(k_plus, wmin_plus, k_minus, e_min, type_prob,
                                v=None, dependence="comonotone"):
    """Critical capital exponents for the typed relation model.

    Parameters are the tail data of the system: ``k_plus``/``wmin_plus`` the
    (R, T, T) out-weight tail exponents and scales per (relation, creditor,
    debtor), ``k_minus``/``e_min`` the (T,) in-exposure tail exponent and
    scale per debtor type (for the direction ``v``), ``type_prob`` the type
    frequencies.  ``dependence`` may be a string, a callable, or an (R, T, T)
    array of precomputed tail-dependence integrals.

    With capitals c = max{R + 1, ceil(mu_b (e(v)/||v||)^nu_b)} the system is
    resilient if nu_b > nu_c_type[b] everywhere, or mu_b > mu_c_type[b] at
    equality, and non-resilient below.
    """
    k_plus = np.asarray(k_plus, dtype=float)
    wmin_plus = np.asarray(wmin_plus, dtype=float)
    if k_plus.ndim != 3 or k_plus.shape[1] != k_plus.shape[2]:
        raise ValueError("k_plus must have shape (R, T, T)")
    r, t, _ = k_plus.shape
    k_minus = np.asarray(k_minus, dtype=float).reshape(t)
    e_min = np.asarray(e_min, dtype=float).reshape(t)
    type_prob = np.asarray(type_prob, dtype=float).reshape(t)
    if np.any(k_plus <= 2.0) or np.any(k_minus <= 2.0):
        raise ValueError("tail exponents must exceed 2")

    if isinstance(dependence, np.ndarray) or (
            not callable(dependence) and not isinstance(dependence, str)):
        lam = np.broadcast_to(np.asarray(dependence, dtype=float),
                              (r, t, t)).copy()
    else:
        lam = np.empty((r, t, t))
        for idx in np.ndindex(r, t, t):
            lam[idx] = tail_dependence_integral(dependence, k_plus[idx])

    v_optimal = wmin_plus * lam
    if v is None:
        v = v_optimal.copy()
    v = np.asarray(v, dtype=float).reshape(r, t, t)
    if np.any(v < 0.0) or not v.sum() > 0.0:
        raise ValueError("direction v must be nonnegative and nonzero")

    nu_c = 2.0 + (k_minus[None, None, :] - 1.0) / (k_plus - 1.0) \
        - k_minus[None, None, :]
    norm = v.sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        mu_c = (norm ** nu_c * type_prob[None, None, :]
                * e_min[None, None, :] ** (1.0 - nu_c)
                * wmin_plus * lam / v)
    mu_c = np.where(v > 0.0, mu_c, 0.0)

    live = wmin_plus * lam > 0.0          # coordinates with any tail mass
    nu_masked = np.where(live, nu_c, -np.inf)
    nu_c_type = nu_masked.max(axis=(0, 1))
    at_max = nu_masked >= nu_c_type[None, None, :] - 1e-12
    mu_c_type = np.where(at_max, mu_c, 0.0).max(axis=(0, 1))
    nu_c_type = np.where(np.isfinite(nu_c_type), nu_c_type, 0.0)
    return MultiTypeExponents(nu_c=nu_c, mu_c=mu_c, nu_c_type=nu_c_type,
                              mu_c_type=mu_c_type, v=v, v_optimal=v_optimal)


# ---------------------------------------------------------------------------
# fire-sales capital
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FireSalesCapital:
    """Linear capital coefficients against fire sales, with validity flags.

    ``theta[m]`` is a sufficient coefficient for capital theta . x at the
    critical sale speed; where ``resilient_for_free`` any positive
    coefficient works (the market out-sells the price fall), and where
    ``non_resilient_regardless`` no linear capital helps (theta is nan
    there: institutions sell overproportionally fast).
    """

    theta: np.ndarray
    resilient_for_free: np.ndarray
    non_resilient_regardless: np.ndarray
    margin: float

    def rule(self) -> HoldingsLinear:
        if np.any(self.non_resilient_regardless):
            raise ValueError("no linear capital ensures resilience: "
                             "nu * q < 1 on some asset")
        return HoldingsLinear(tuple(self.theta))


def fire_sales_capital(nu, q, mu, mean_holdings, margin: float = 1e-3) -> FireSalesCapital:
    """Sufficient linear capital theta . x for sale speeds q and impact power nu.

    At the critical speed q^m = 1/nu the coefficient is
    mu^m E[X^m] (1 + margin); faster sales than 1/nu need no fire-sale
    capital at all, slower ones cannot be fixed by any linear rule.
    """
    nu = float(nu)
    if not nu > 0.0:
        raise ValueError("impact power nu must be positive")
    q = np.atleast_1d(np.asarray(q, dtype=float))
    mu, ex = np.broadcast_to(mu, q.shape).astype(float), \
        np.broadcast_to(mean_holdings, q.shape).astype(float)
    if np.any(q <= 0.0):
        raise ValueError("sale speeds q must be positive")
    free = nu * q > 1.0 + 1e-12
    dead = nu * q < 1.0 - 1e-12
    theta = mu * ex * (1.0 + margin)
    theta[dead] = np.nan
    return FireSalesCapital(theta=theta, resilient_for_free=free,
                            non_resilient_regardless=dead, margin=margin)


def one_asset_fire_sales_exponents(beta, nu: float = 1.0, mu: float = 1.0,
                                   tail_scale: float = 1.0):
    """Critical (gamma_c, alpha_c) for power capitals c = alpha x^gamma.

    One asset, sales at default, holdings with tail scale B x^(1-beta) and
    price impact mu chi^nu: resilient above (gamma_c, alpha_c), non-resilient
    below.  gamma_c may be negative, meaning even flat capitals work.
    """
    if not beta > 2.0:
        raise ValueError("holdings tail exponent must exceed 2")
    gamma_c = 1.0 - nu * (beta - 2.0)
    alpha_c = mu * (tail_scale * (beta - 1.0) / (beta - 2.0)) ** nu
    return gamma_c, alpha_c


def diversification_exponents(fractions, beta):
    """Critical pair for portfolios split in fixed fractions across assets.

    c = alpha (x_tot)^gamma with Pareto(beta) totals, unit-scale impact:
    gamma_c = 3 - beta and alpha_c = sum(fractions^2) (beta-1)/(beta-2);
    the perfectly even split minimizes alpha_c.
    """
    lam = np.asarray(fractions, dtype=float)
    if np.any(lam < 0.0) or abs(lam.sum() - 1.0) > 1e-9:
        raise ValueError("portfolio fractions must be nonnegative and sum to 1")
    if not beta > 2.0:
        raise ValueError("holdings tail exponent must exceed 2")
    return 3.0 - beta, float((lam ** 2).sum() * (beta - 1.0) / (beta - 2.0))


def overlap_exponents(groups, specialized, joint, beta):
    """Critical pair for group portfolios with joint and specialized assets.

    ``groups`` subsystems each even-split over ``specialized`` own assets
    plus ``joint`` shared ones.  With spread = specialized + joint and
    overlap = joint/spread:
    alpha_c = (1 + (groups-1) overlap) / (spread * groups) (beta-1)/(beta-2),
    so spreading wider helps and overlapping more hurts.
    """
    if groups < 1 or specialized < 0 or joint < 0 or specialized + joint < 1:
        raise ValueError("need at least one group and one asset")
    if not beta > 2.0:
        raise ValueError("holdings tail exponent must exceed 2")
    spread = specialized + joint
    overlap = joint / spread
    alpha_c = (1.0 + (groups - 1.0) * overlap) / (spread * groups) \
        * (beta - 1.0) / (beta - 2.0)
    return 3.0 - beta, float(alpha_c)


# ---------------------------------------------------------------------------
# monetary capital per institution
# ---------------------------------------------------------------------------

def capital_requirement(rule, w_minus=None, holdings=None, mean_exposure=1.0,
                        inst_type=None, in_weights=None, exposures=None):
    """Monetary capital floor per the rule; scalar in, scalar out.

    Count-valued rules (thresholds against defaulted neighbours) are scaled
    by ``mean_exposure``; monetary rules pass through; a combined rule
    scales only its threshold part.  The robust variant needs the realized
    ``exposures`` and raises without them.
    """
    scalar = np.ndim(w_minus) == 0 and (holdings is None or np.ndim(holdings) <= 1)
    if isinstance(rule, Combined):
        direct = capital_requirement(rule.direct, w_minus=w_minus,
                                     holdings=holdings, mean_exposure=mean_exposure,
                                     inst_type=inst_type, in_weights=in_weights,
                                     exposures=exposures)
        sales = np.atleast_2d(np.asarray(holdings, dtype=float)) @ np.asarray(rule.theta)
        out = np.atleast_1d(direct) + sales
    elif isinstance(rule, (ConstCapital, PowerThreshold, MultiTypePower)):
        counts = eval_capital_rule(rule, w_minus=w_minus, holdings=holdings,
                                   inst_type=inst_type, in_weights=in_weights)
        out = counts * np.asarray(mean_exposure, dtype=float)
    elif isinstance(rule, (HoldingsLinear, RobustLargest)):
        out = eval_capital_rule(rule, w_minus=w_minus, holdings=holdings,
                                exposures=exposures)
    else:
        raise TypeError(f"unknown capital rule {rule!r}")
    out = np.atleast_1d(np.asarray(out, dtype=float))
    return float(out[0]) if scalar and out.size == 1 else out


# ---------------------------------------------------------------------------
# buffer against finite shocks
# ---------------------------------------------------------------------------

def _shock_floor(law: ParetoLaw, p: float, shock: str) -> float:
    """f_p(0+): the out-weight mass wiped out directly by the shock."""
    if shock == "uniform" or law.dependence == "independent":
        return p * law.mean_out()
    bp = law.beta_plus
    return law.wmin_plus * (bp - 1.0) / (bp - 2.0) * p ** ((bp - 2.0) / (bp - 1.0))


def _dip_value(law: ParetoLaw, p: float, delta: float, shock: str,
               gamma_c: float, alpha_c: float) -> float:
    """Minimum of the shocked residual before its first turning point.

    The shocked map starts at f_p(0+) > 0, dips as thresholds absorb the
    contagion, and rises again toward the macroscopic branch; the system
    with buffered thresholds is resilient iff the dip reaches zero.
    """
    rule = PowerThreshold(alpha_c * (1.0 + delta), gamma_c * (1.0 + delta),
                          floor=2, rounding="floor")
    shocked = ShockedLaw(replace(law, capital_rule=rule), kind=shock, p=p)

    def f_at(z):
        return float(eval_f(shocked, z=z)[0].ravel()[0])

    f0 = _shock_floor(law, p, shock)
    zs = np.geomspace(0.35 * f0, 4.0 * law.mean_out(), 120)
    fv = np.array([f_at(z) for z in zs])
    iturn = None
    for i in range(len(zs) - 1):
        if fv[i] <= 0.0 or fv[i + 1] > fv[i]:
            iturn = i
            break
    if iturn is None:
        return float(fv.min())
    lo = zs[max(iturn - 2, 0)]
    hi = zs[min(iturn + 3, len(zs) - 1)]
    z2 = np.geomspace(lo, hi, 40)
    f2 = np.array([f_at(z) for z in z2])
    return float(min(fv[: iturn + 1].min(), f2.min()))


def shock_buffer_search(law: ParetoLaw, p: float, shock: str = "uniform",
                        tol: float = 1e-4, delta_max: float = 1.0) -> float:
    """Least buffer delta making the law resilient to a shock of size p.

    The law supplies the weight tails; its capital rule is replaced during
    the search by tau(w) = max{2, floor(alpha_c (1+delta) w^(gamma_c (1+delta)))}
    and delta is bisected on the dip sign of the shocked residual.  ``shock``
    is 'uniform' (each institution fails w.p. p) or 'largest' (the p-quantile
    by in-weight fails).  Raises when no delta <= delta_max suffices.
    """
    if not isinstance(law, ParetoLaw):
        raise TypeError("buffer search needs a Pareto-tailed law")
    if not 0.0 < p <= 0.05:
        raise ValueError("shock size p must lie in (0, 0.05]")
    if shock not in ("uniform", "largest"):
        raise ValueError("shock must be 'uniform' or 'largest'")
    gamma_c, alpha_c = contagion_exponents(
        law.beta_minus, law.beta_plus, law.wmin_minus, law.wmin_plus,
        law.dependence)
    if _dip_value(law, p, 0.0, shock, gamma_c, alpha_c) <= 0.0:
        return 0.0
    hi = 0.25
    while _dip_value(law, p, hi, shock, gamma_c, alpha_c) > 0.0:
        hi *= 2.0
        if hi > delta_max:
            raise ValueError(f"no buffer below {delta_max} makes the system "
                             f"resilient to a {shock} shock of size {p}")
    lo = hi / 2.0 if hi > 0.25 else 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _dip_value(law, p, mid, shock, gamma_c, alpha_c) <= 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# first-order amplification
# ---------------------------------------------------------------------------

def small_shock_amplification(law, kappa=None, kappa_S=None) -> float:
    """First-order damage amplification 1 - kappa_S E[W+] / (kappa E[S]).

    kappa is the one-sided slope of the residual at the origin and kappa_S
    the matching damage slope; both are computed from the law when not
    given.  Only the unit-threshold mass contributes: institutions that
    topple from a single neighbour default.  kappa >= 0 means no linear
    response exists (the system is already non-resilient).
    """
    if isinstance(law, ShockedLaw):
        raise ValueError("amplification applies to the unshocked law")
    r, t, m = law.dims
    if (r, t) != (1, 1) or m != 0:
        raise ValueError("first-order amplification is defined for "
                         "single-type pure default-contagion laws")
    mean_s = _mean_importance(law)
    if kappa is None or kappa_S is None:
        k_est, ks_est, ewp = _linear_response(law)
        kappa = k_est if kappa is None else float(kappa)
        kappa_S = ks_est if kappa_S is None else float(kappa_S)
    else:
        kappa, kappa_S = float(kappa), float(kappa_S)
        ewp = law.mean_out() if isinstance(law, ParetoLaw) else \
            float(np.dot(law.class_view().weight, law.class_view().w_plus))
    if kappa >= 0.0:
        raise ValueError("kappa >= 0: no linear small-shock response "
                         "(non-resilient regime)")
    return 1.0 - kappa_S / kappa * ewp / max(mean_s, 1e-300)


def _linear_response(law):
    """(kappa, kappa_S, E[W+]) from the unit-threshold mass of the law."""
    if isinstance(law, FinitaryLaw):
        view = law.class_view()
        wm, wp = view.w_minus, view.w_plus
        unit = (view.capital <= 1.0) & (view.loss < view.capital)
        ewp = float(np.dot(view.weight, wp))
        kappa = float(np.dot(view.weight, wm * wp * unit)) - 1.0
        kappa_s = float(np.dot(view.weight, wm * view.importance * unit))
        return kappa, kappa_s, ewp
    if isinstance(law, ParetoLaw):
        ewp = law.mean_out()
        if law.dependence == "comonotone":
            cross = expect(law, lambda v: v.w_minus * v.w_plus * (v.capital <= 1.0))
            kappa_s = expect(law, lambda v: v.w_minus * v.importance * (v.capital <= 1.0))
        elif law.dependence == "independent":
            base = expect(law, lambda v: v.w_minus * (v.capital <= 1.0))
            cross = base * ewp
            kappa_s = base * ewp  # importance = out-weight factorizes too
            try:
                kappa_s = expect(law, lambda v: v.w_minus * v.importance
                                 * (v.capital <= 1.0))
            except (ValueError, TypeError):
                pass
        else:
            raise ValueError("amplification needs comonotone or independent "
                             "dependence")
        return cross - 1.0, kappa_s, ewp
    raise TypeError(f"unknown law {law!r}")


# ---------------------------------------------------------------------------
# targeted shocks on coordinate subsets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubsetRoot:
    """Limit root and damage of shocks confined to a coordinate subset."""

    z0: np.ndarray
    chi0: np.ndarray
    g: float


def shock_on_subset(law, subset) -> SubsetRoot:
    """Damage lower bound for vanishing shocks targeting only ``subset``.

    ``subset`` selects (relation, creditor, debtor) coordinates, as a boolean
    mask or an iterable of index triples.  The epsilon relaxation pushes only
    those coordinates (residual <= -eps on the subset, <= 0 elsewhere); the
    epsilon -> 0 limit is the least post-shock equilibrium.  Sale coordinates
    are never pushed: sales follow defaults.
    """
    base, shock = _split(law)
    if shock is not None:
        raise ValueError("subset analysis applies to the unshocked law")
    r, t, m = base.dims
    mask = np.zeros((r, t, t), dtype=bool)
    arr = np.asarray(subset)
    if arr.dtype == bool:
        mask |= arr.reshape(r, t, t)
    else:
        for idx in subset:
            mask[tuple(idx)] = True
    if not mask.any():
        raise ValueError("subset must contain at least one coordinate")
    scale_z, scale_chi = _coordinate_scales(law)
    if np.any(mask & (scale_z <= 0.0)):
        raise ValueError("subset contains coordinates with no out-weight mass")

    active_z, active_chi = scale_z > 0, scale_chi > 0
    z, chi = _norm_point(base, None, None)
    seq = []
    for eps in _EPS_LEVELS:
        bump = eps * mask
        for _ in range(_MAX_ITER):
            fz, fchi = eval_f(law, z, chi, left_continuous=False)
            z2 = np.where(active_z, np.maximum(z + fz + bump, 0.0), 0.0)
            chi2 = np.where(active_chi, np.maximum(chi + fchi, 0.0), 0.0) \
                if chi.size else chi
            step = max(np.max(np.abs(z2 - z), initial=0.0),
                       np.max(np.abs(chi2 - chi), initial=0.0))
            z, chi = z2, chi2
            if step < _STEP_TOL:
                break
        seq.append((z.copy(), chi.copy()))
    raw_z, raw_chi = seq[-1]
    prev_z, prev_chi = seq[-2]
    z0 = np.maximum(2.0 * raw_z - prev_z, 0.0)
    chi0 = np.maximum(2.0 * raw_chi - prev_chi, 0.0) if raw_chi.size else raw_chi
    zero = np.all(raw_z <= TOL_ZERO * np.maximum(scale_z, 1e-300)) and \
        (not raw_chi.size or np.all(raw_chi <= TOL_ZERO * np.maximum(scale_chi, 1e-300)))
    if zero:
        z0, chi0 = np.zeros_like(raw_z), np.zeros_like(raw_chi)
        return SubsetRoot(z0=z0, chi0=chi0, g=0.0)
    return SubsetRoot(z0=z0, chi0=chi0,
                      g=float(eval_g(law, z0, chi0, left_continuous=True)))
