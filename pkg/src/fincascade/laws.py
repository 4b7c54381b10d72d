"""Vertex laws: finitary mixtures and Pareto-tailed parametric families.

A law describes the limiting distribution of a single institution's
characteristics (relation weights, holdings, importance, capital, loss).
Two variants:

* :class:`FinitaryLaw` -- finitely many classes with probabilities;
  expectations are exact finite sums.
* :class:`ParetoLaw` -- single-type power-law in-weight ``W- ~ Par(beta-,
  wmin-)`` with the out-weight coupled comonotonically (``W+`` a
  deterministic power of ``W-``) or independently; capital, importance and
  holdings attach through rules evaluated on ``W-``.

Expectations against a Pareto law are computed on the probability scale
``u = F(w)``: adaptive Simpson on [0, 1-h] plus a fitted power-tail
completion for the last sliver, which is exact for the power-times-bounded
integrands that arise here.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import systems as fsys
from .rng import vertex_uniforms
from .rules import ConstCapital, eval_capital_rule, rule_from_spec, rule_to_spec
from .systems import FinancialSystem

__all__ = [
    "VertexClass", "FinitaryLaw", "ParetoLaw", "ShockedLaw", "ClassView",
    "ConstMark", "PowerMark", "OutWeightMark",
    "expect", "sample_system", "empirical_law",
    "law_to_spec", "law_from_spec", "QuadratureError",
]


class QuadratureError(RuntimeError):
    """Adaptive refinement exhausted; carries the residual error estimate."""

    def __init__(self, residual: float):
        super().__init__(f"quadrature did not converge; residual ~ {residual:.3e}")
        self.residual = residual


# ---------------------------------------------------------------------------
# mark rules (importance / holdings as functions of the in-weight)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstMark:
    v: float


@dataclass(frozen=True)
class PowerMark:
    """mark = coef * w_minus^exponent."""

    coef: float = 1.0
    exponent: float = 1.0


@dataclass(frozen=True)
class OutWeightMark:
    """mark = the institution's out-weight (importance = W+)."""


def _eval_mark(rule, w_minus, w_plus):
    if isinstance(rule, ConstMark):
        return np.full_like(np.asarray(w_minus, dtype=float), rule.v)
    if isinstance(rule, PowerMark):
        return rule.coef * np.power(np.asarray(w_minus, dtype=float), rule.exponent)
    if isinstance(rule, OutWeightMark):
        if w_plus is None:
            raise ValueError("importance = out-weight needs a coupled out-weight")
        return np.asarray(w_plus, dtype=float).copy()
    raise TypeError(f"unknown mark rule {rule!r}")


def _mark_to_spec(rule):
    if isinstance(rule, ConstMark):
        return {"kind": "const", "v": rule.v}
    if isinstance(rule, PowerMark):
        return {"kind": "power", "coef": rule.coef, "exponent": rule.exponent}
    if isinstance(rule, OutWeightMark):
        return {"kind": "out_weight"}
    raise TypeError(f"cannot serialize mark rule {rule!r}")


def _mark_from_spec(spec):
    kind = spec["kind"]
    if kind == "const":
        return ConstMark(v=spec["v"])
    if kind == "power":
        return PowerMark(coef=spec.get("coef", 1.0), exponent=spec.get("exponent", 1.0))
    if kind == "out_weight":
        return OutWeightMark()
    raise ValueError(f"unknown mark rule kind {kind!r}")


# ---------------------------------------------------------------------------
# law variants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VertexClass:
    """One atom of a finitary law; weights have shape (R, T)."""

    prob: float
    in_weights: np.ndarray
    out_weights: np.ndarray
    holdings: np.ndarray = ()
    importance: float = 1.0
    capital: float = np.inf
    loss: float = 0.0
    inst_type: int = 0

    def __post_init__(self):
        inw = np.atleast_2d(np.asarray(self.in_weights, dtype=float))
        outw = np.atleast_2d(np.asarray(self.out_weights, dtype=float))
        object.__setattr__(self, "in_weights", inw)
        object.__setattr__(self, "out_weights", outw)
        object.__setattr__(self, "holdings", np.ravel(np.asarray(self.holdings, dtype=float)))
        if not 0.0 <= self.prob <= 1.0:
            raise ValueError("class probability must lie in [0, 1]")
        if inw.shape != outw.shape:
            raise ValueError("in/out weight grids must share a shape")
        if np.any(inw < 0) or np.any(outw < 0) or np.any(self.holdings < 0):
            raise ValueError("weights and holdings must be nonnegative")
        if self.loss < 0 or not np.isfinite(self.loss):
            raise ValueError("loss must be finite and nonnegative")
        if self.capital < 0:
            raise ValueError("capital must be nonnegative (inf allowed)")


@dataclass(frozen=True)
class FinitaryLaw:
    classes: tuple
    sale: object = field(default_factory=fsys.IndicatorAtDefault)
    impact: object = None

    def __post_init__(self):
        cls = tuple(self.classes)
        object.__setattr__(self, "classes", cls)
        if not cls:
            raise ValueError("a finitary law needs at least one class")
        total = sum(c.prob for c in cls)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"class probabilities sum to {total}, not 1")
        if len({c.in_weights.shape for c in cls}) != 1 or len({len(c.holdings) for c in cls}) != 1:
            raise ValueError("all classes must share (R, T, M)")
        r, t = cls[0].in_weights.shape
        if any(not 0 <= c.inst_type < t for c in cls):
            raise ValueError("inst_type out of range")

    @property
    def dims(self) -> tuple:
        r, t = self.classes[0].in_weights.shape
        return r, t, len(self.classes[0].holdings)

    def class_view(self) -> "ClassView":
        k = len(self.classes)
        r, t, m = self.dims
        return ClassView(
            weight=np.array([c.prob for c in self.classes]),
            in_w=np.stack([c.in_weights for c in self.classes]),
            out_w=np.stack([c.out_weights for c in self.classes]),
            holdings=np.array([c.holdings for c in self.classes]).reshape(k, m),
            importance=np.array([c.importance for c in self.classes]),
            capital=np.array([c.capital for c in self.classes]),
            loss=np.array([c.loss for c in self.classes]),
            inst_type=np.array([c.inst_type for c in self.classes], dtype=np.int64),
        )


@dataclass(frozen=True)
class ParetoLaw:
    """Single-type law with Par(beta, wmin) weights and coupled marks.

    dependence: 'comonotone' couples W+ = wmin+ * (W-/wmin-)^rho with
    rho = (beta- - 1)/(beta+ - 1) (equal quantiles); 'independent' draws
    W+ on its own stream.  A tail-dependence function may be recorded for
    the capital-exponent calculators but is rejected by generic
    expectations, whose value it does not determine.
    """

    beta_minus: float
    beta_plus: float
    wmin_minus: float = 1.0
    wmin_plus: float = 1.0
    dependence: object = "comonotone"
    capital_rule: object = field(default_factory=lambda: ConstCapital(np.inf))
    importance_rule: object = field(default_factory=lambda: ConstMark(1.0))
    holdings_rule: tuple = ()
    sale: object = field(default_factory=fsys.IndicatorAtDefault)
    impact: object = None

    def __post_init__(self):
        if not (self.beta_minus > 2 and self.beta_plus > 2):
            raise ValueError("tail exponents must exceed 2")
        if not (self.wmin_minus > 0 and self.wmin_plus > 0):
            raise ValueError("scale minima must be positive")
        if isinstance(self.dependence, str) and self.dependence not in ("comonotone", "independent"):
            raise ValueError("dependence must be comonotone, independent or a tail function")
        object.__setattr__(self, "holdings_rule", tuple(np.atleast_1d(self.holdings_rule))
                           if self.holdings_rule else ())

    @property
    def dims(self) -> tuple:
        return 1, 1, len(self.holdings_rule)

    @property
    def coupling_exponent(self) -> float:
        """rho with W+ = wmin+ (W-/wmin-)^rho under comonotone dependence."""
        return (self.beta_minus - 1.0) / (self.beta_plus - 1.0)

    def quantile_in(self, u) -> np.ndarray:
        """Inverse CDF of W-."""
        u = np.asarray(u, dtype=float)
        return self.wmin_minus * np.power(1.0 - u, -1.0 / (self.beta_minus - 1.0))

    def quantile_in_tail(self, t) -> np.ndarray:
        """Inverse CDF of W- parameterized by the upper tail mass t = 1 - u.

        Avoids the catastrophic cancellation of 1 - u for t below 1e-12.
        """
        t = np.asarray(t, dtype=float)
        return self.wmin_minus * np.power(t, -1.0 / (self.beta_minus - 1.0))

    def quantile_out(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.wmin_plus * np.power(1.0 - u, -1.0 / (self.beta_plus - 1.0))

    def coupled_out(self, w_minus) -> np.ndarray:
        w = np.asarray(w_minus, dtype=float)
        return self.wmin_plus * np.power(w / self.wmin_minus, self.coupling_exponent)

    def mean_in(self) -> float:
        return self.wmin_minus * (self.beta_minus - 1.0) / (self.beta_minus - 2.0)

    def mean_out(self) -> float:
        return self.wmin_plus * (self.beta_plus - 1.0) / (self.beta_plus - 2.0)

    def view_at(self, w_minus, weight=None) -> "ClassView":
        """Marks evaluated at given in-weights (quadrature nodes or samples)."""
        w = np.asarray(w_minus, dtype=float)
        wp = self.coupled_out(w) if self.dependence == "comonotone" else None
        m = len(self.holdings_rule)
        hold = (np.stack([_eval_mark(r, w, wp) for r in self.holdings_rule], axis=1)
                if m else np.zeros((w.size, 0)))
        # importance = W+ has no pointwise value under independence; leave it
        # None there and let callers factor through mean_out()
        imp = (None if wp is None and isinstance(self.importance_rule, OutWeightMark)
               else _eval_mark(self.importance_rule, w, wp))
        return ClassView(
            weight=np.full(w.size, np.nan) if weight is None else np.asarray(weight, dtype=float),
            in_w=w.reshape(-1, 1, 1),
            out_w=None if wp is None else wp.reshape(-1, 1, 1),
            holdings=hold,
            importance=imp,
            capital=eval_capital_rule(self.capital_rule, w_minus=w, holdings=hold),
            loss=np.zeros(w.size),
            inst_type=np.zeros(w.size, dtype=np.int64),
        )


@dataclass(frozen=True)
class ShockedLaw:
    """A base law hit by an ex-ante shock of relative size p.

    kind 'uniform': every institution defaults ex post with probability p;
    kind 'largest': the p-fraction with the largest in-weight defaults.
    Asymptotic evaluations fold the shock analytically; sampling applies
    the matching finite-n rule (floor(p n) institutions, loss 2c).
    """

    base: object
    kind: str = "uniform"
    p: float = 0.01

    def __post_init__(self):
        if self.kind not in ("uniform", "largest"):
            raise ValueError("shock kind must be 'uniform' or 'largest'")
        if not 0.0 < self.p < 1.0:
            raise ValueError("shock size p must lie in (0, 1)")
        if isinstance(self.base, ShockedLaw):
            raise ValueError("shocks do not stack")

    @property
    def dims(self) -> tuple:
        return self.base.dims

    def fold_finitary(self) -> FinitaryLaw:
        """Explicit shocked mixture for a finitary base."""
        law = self.base
        if not isinstance(law, FinitaryLaw):
            raise TypeError("fold_finitary needs a finitary base")
        shocked = []
        if self.kind == "uniform":
            for c in law.classes:
                if not np.isfinite(c.capital):
                    shocked.append(c)
                    continue
                shocked.append(VertexClass(
                    prob=c.prob * (1.0 - self.p), in_weights=c.in_weights,
                    out_weights=c.out_weights, holdings=c.holdings,
                    importance=c.importance, capital=c.capital, loss=c.loss,
                    inst_type=c.inst_type))
                shocked.append(VertexClass(
                    prob=c.prob * self.p, in_weights=c.in_weights,
                    out_weights=c.out_weights, holdings=c.holdings,
                    importance=c.importance, capital=c.capital,
                    loss=2.0 * max(c.capital, EPS_LOSS), inst_type=c.inst_type))
        else:  # largest: split classes by descending total in-weight
            order = sorted((j for j in range(len(law.classes))
                            if np.isfinite(law.classes[j].capital)),
                           key=lambda j: -law.classes[j].in_weights.sum())
            remaining = self.p
            probs_shocked = [0.0] * len(law.classes)
            for j in order:
                take = min(remaining, law.classes[j].prob)
                probs_shocked[j] = take
                remaining -= take
                if remaining <= 0:
                    break
            for j, c in enumerate(law.classes):
                keep = c.prob - probs_shocked[j]
                if keep > 0:
                    shocked.append(VertexClass(
                        prob=keep, in_weights=c.in_weights, out_weights=c.out_weights,
                        holdings=c.holdings, importance=c.importance,
                        capital=c.capital, loss=c.loss, inst_type=c.inst_type))
                if probs_shocked[j] > 0 and np.isfinite(c.capital):
                    shocked.append(VertexClass(
                        prob=probs_shocked[j], in_weights=c.in_weights,
                        out_weights=c.out_weights, holdings=c.holdings,
                        importance=c.importance, capital=c.capital,
                        loss=2.0 * max(c.capital, EPS_LOSS), inst_type=c.inst_type))
        return FinitaryLaw(classes=tuple(shocked), sale=law.sale, impact=law.impact)


EPS_LOSS = 1.0  # loss handed to zero-capital institutions hit by a shock


@dataclass
class ClassView:
    """Struct-of-arrays access to k classes (or quadrature nodes).

    ``out_w`` is None for an independent Pareto law: the out-weight is then
    independent of everything else, and callers must factor expectations
    through :meth:`ParetoLaw.mean_out` instead of reading it here.
    """

    weight: np.ndarray
    in_w: np.ndarray
    out_w: np.ndarray
    holdings: np.ndarray
    importance: np.ndarray
    capital: np.ndarray
    loss: np.ndarray
    inst_type: np.ndarray

    @property
    def w_minus(self) -> np.ndarray:
        return self.in_w.reshape(len(self.capital), -1).sum(axis=1)

    @property
    def w_plus(self) -> np.ndarray:
        if self.out_w is None:
            raise ValueError("out-weight undefined at nodes of an independent law; "
                             "factor the expectation through mean_out()")
        return self.out_w.reshape(len(self.capital), -1).sum(axis=1)


# ---------------------------------------------------------------------------
# expectation engine
# ---------------------------------------------------------------------------

_TAIL_H = 1e-8


def expect(law, functional, tol: float = 1e-8):
    """E[functional] against the law.

    ``functional`` receives a :class:`ClassView` and returns one value per
    class/node (vectorized).  Finitary laws are exact sums; Pareto laws are
    integrated adaptively on the probability scale (abs tol ``tol``).
    """
    if isinstance(law, FinitaryLaw):
        view = law.class_view()
        vals = np.asarray(functional(view), dtype=float)
        return float(np.dot(view.weight, vals))
    if isinstance(law, ParetoLaw):
        if not isinstance(law.dependence, str):
            raise ValueError("generic expectation under a tail-dependence function is "
                             "under-determined; supply comonotone or independent")

        def g(u):
            w = law.quantile_in(u)
            return np.asarray(functional(law.view_at(w)), dtype=float)

        def g_tail(t):
            w = law.quantile_in_tail(t)
            return np.asarray(functional(law.view_at(w)), dtype=float)

        main = _adaptive_simpson(g, 0.0, 1.0 - _TAIL_H, tol)
        return main + _tail_integral(g_tail)
    raise TypeError(f"unknown law {law!r}")


_TAIL_FLOOR = 1e-16
_GL12_X, _GL12_W = np.polynomial.legendre.leggauss(12)


def _tail_integral(g_t, edges=None) -> float:
    """Integral of g_t over the tail sliver t in (0, _TAIL_H], t = 1 - u.

    Geometric Gauss-Legendre panels in log t absorb any fixed power and the
    smooth saturation of Poisson tails that often happens mid-sliver; known
    integrand kinks are passed as extra panel boundaries in ``edges``.  The
    mass below _TAIL_FLOOR is completed with a two-point power fit, which is
    safe that deep because bounded factors have reached their limits.
    """
    bounds = [_TAIL_H]
    while bounds[-1] > _TAIL_FLOOR * (1.0 + 1e-9):
        bounds.append(max(bounds[-1] / 16.0, _TAIL_FLOOR))
    if edges is not None:
        bounds.extend(e for e in np.atleast_1d(edges)
                      if _TAIL_FLOOR < e < _TAIL_H)
        bounds.sort(reverse=True)
    total = 0.0
    for t_hi, t_lo in zip(bounds[:-1], bounds[1:]):
        if t_hi <= t_lo * (1.0 + 1e-12):
            continue
        y0, y1 = np.log(t_lo), np.log(t_hi)
        ys = 0.5 * (y1 - y0) * _GL12_X + 0.5 * (y0 + y1)
        ts = np.exp(ys)
        vals = np.asarray(g_t(ts), dtype=float)
        total += 0.5 * (y1 - y0) * float(np.dot(_GL12_W, ts * vals))
    g1 = float(np.asarray(g_t(np.array([_TAIL_FLOOR])))[0])
    if g1 == 0.0:
        return total
    g4 = float(np.asarray(g_t(np.array([_TAIL_FLOOR / 4.0])))[0])
    if g1 < 0.0 or g4 <= 0.0:
        # sign change at the floor: the remaining mass is a crude rectangle
        return total + g1 * _TAIL_FLOOR
    s = np.log(g4 / g1) / np.log(4.0)
    if s >= 0.999:
        raise QuadratureError(residual=np.inf)
    return total + g1 * _TAIL_FLOOR / (1.0 - s)


def _adaptive_simpson(g, a: float, b: float, tol: float, max_depth: int = 40,
                      edges_hint=None) -> float:
    """Work-list adaptive Simpson; g is evaluated in batches.

    The initial partition is geometric toward b so that integrands whose
    mass sits deep in the Pareto tail are always seen before refinement;
    ``edges_hint`` adds known kinks (threshold breakpoints, shock cuts) to
    the initial partition.
    """
    rem = b - a
    decades = max(np.log10(max(rem / _TAIL_H, 10.0)), 1.0)
    qs = np.linspace(0.0, decades, int(np.ceil(decades * 6)) + 1)
    edges = np.concatenate([b - rem * 10.0 ** (-qs), [b]])
    if edges_hint is not None and len(edges_hint):
        edges = np.concatenate([edges, np.asarray(edges_hint, dtype=float)])
    edges = np.unique(np.clip(edges, a, b))

    lo = edges[:-1]
    hi = edges[1:]
    mid = 0.5 * (lo + hi)
    f_all = g(np.concatenate([edges, mid]))
    f_edges, f_mid = f_all[: edges.size], f_all[edges.size:]
    flo, fhi = f_edges[:-1], f_edges[1:]
    s_whole = (hi - lo) / 6.0 * (flo + 4.0 * f_mid + fhi)
    tols = np.full(lo.size, tol / lo.size)
    depth = np.zeros(lo.size, dtype=np.int64)

    total = 0.0
    residual = 0.0
    while lo.size:
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        f_new = g(np.concatenate([lm, rm]))
        flm, frm = f_new[: lo.size], f_new[lo.size:]
        s_left = (mid - lo) / 6.0 * (flo + 4.0 * flm + f_mid)
        s_right = (hi - mid) / 6.0 * (f_mid + 4.0 * frm + fhi)
        err = s_left + s_right - s_whole
        done = (np.abs(err) <= 15.0 * tols) | (depth >= max_depth)
        total += float(np.sum(s_left[done] + s_right[done] + err[done] / 15.0))
        forced = done & (np.abs(err) > 15.0 * tols)
        residual += float(np.sum(np.abs(err[forced]) / 15.0))
        keep = ~done
        lo = np.concatenate([lo[keep], mid[keep]])
        hi = np.concatenate([mid[keep], hi[keep]])
        flo = np.concatenate([flo[keep], f_mid[keep]])
        fhi = np.concatenate([f_mid[keep], fhi[keep]])
        f_mid = np.concatenate([flm[keep], frm[keep]])
        mid = 0.5 * (lo + hi)
        s_whole = np.concatenate([s_left[keep], s_right[keep]])
        tols = np.concatenate([tols[keep] / 2.0, tols[keep] / 2.0])
        depth = np.concatenate([depth[keep] + 1, depth[keep] + 1])
    if residual > max(tol, 1e-12) * 10.0:
        raise QuadratureError(residual=residual)
    return total


# ---------------------------------------------------------------------------
# sampling and the empirical inverse
# ---------------------------------------------------------------------------

def sample_system(law, n: int, seed: int) -> FinancialSystem:
    """n institutions i.i.d. from the law; per-institution counter streams."""
    if n < 1:
        raise ValueError("need n >= 1")
    if isinstance(law, ShockedLaw):
        base = sample_system(law.base, n, seed)
        rule = fsys.ShockRule(kind="uniform" if law.kind == "uniform" else "largest",
                              p=law.p)
        return fsys.ex_post_default(base, rule, seed=seed)
    idx = np.arange(n)
    if isinstance(law, FinitaryLaw):
        probs = np.array([c.prob for c in law.classes])
        cum = np.cumsum(probs)
        cum[-1] = 1.0
        which = np.searchsorted(cum, vertex_uniforms(seed, idx, slot=0), side="right")
        view = law.class_view()
        r, t, m = law.dims
        return FinancialSystem(
            in_weights=view.in_w[which], out_weights=view.out_w[which],
            holdings=view.holdings[which], importance=view.importance[which],
            capital=view.capital[which], loss=view.loss[which],
            inst_type=view.inst_type[which], sale=law.sale, impact=law.impact,
        )
    if isinstance(law, ParetoLaw):
        u = vertex_uniforms(seed, idx, slot=0)
        w_minus = law.quantile_in(u)
        if law.dependence == "comonotone":
            w_plus = law.coupled_out(w_minus)
        elif law.dependence == "independent":
            w_plus = law.quantile_out(vertex_uniforms(seed, idx, slot=1))
        else:
            raise ValueError("cannot sample under a bare tail-dependence function")
        m = len(law.holdings_rule)
        hold = (np.stack([_eval_mark(r, w_minus, w_plus) for r in law.holdings_rule], axis=1)
                if m else np.zeros((n, 0)))
        return FinancialSystem(
            in_weights=w_minus.reshape(n, 1, 1), out_weights=w_plus.reshape(n, 1, 1),
            holdings=hold,
            importance=_eval_mark(law.importance_rule, w_minus, w_plus),
            capital=eval_capital_rule(law.capital_rule, w_minus=w_minus, holdings=hold),
            loss=np.zeros(n), inst_type=np.zeros(n, dtype=np.int64),
            sale=law.sale, impact=law.impact,
        )
    raise TypeError(f"unknown law {law!r}")


def discretize_law(law: ParetoLaw, atoms: int = 1000) -> FinitaryLaw:
    """Equal-probability quantile grid over W-; a documented approximation.

    Each atom carries the conditional in-weight mean of its probability bin
    (closed form for the power tail), so E[W-] is preserved exactly; under
    comonotone dependence the out-weight likewise carries the conditional
    mean of W+, preserving E[W+].  Under independence every atom carries
    the scalar mean out-weight, which is exact for all map and importance
    evaluations (out-weights only enter linearly) but not for sampling.
    Marks (capital, holdings, importance) are evaluated at the atom's
    in-weight.
    """
    if not isinstance(law, ParetoLaw):
        raise TypeError("discretization applies to continuous laws")
    if atoms < 2:
        raise ValueError("need at least 2 atoms")
    bm, bp = law.beta_minus, law.beta_plus
    edges_t = 1.0 - np.arange(atoms + 1) / atoms  # tail masses 1 .. 0
    with np.errstate(divide="ignore"):
        edges_w = np.where(edges_t > 0,
                           np.power(edges_t, -1.0 / (bm - 1.0)), np.inf)

    def bin_mean(rho):
        # E[(W-/wmin)^rho | bin] over tail-mass bins, from the power tail
        e = bm - 1.0 - rho
        if e <= 0:
            raise ValueError("conditional mean diverges for this exponent")
        a, b = edges_w[:-1], edges_w[1:]
        with np.errstate(invalid="ignore"):
            num = (bm - 1.0) / e * (a ** -e - np.where(np.isinf(b), 0.0, b ** -e))
        return num * atoms  # bins have probability 1/atoms

    w_atoms = law.wmin_minus * bin_mean(1.0)
    if law.dependence == "comonotone":
        out_atoms = law.wmin_plus * bin_mean(law.coupling_exponent)
    else:
        out_atoms = np.full(atoms, law.mean_out())
    view = law.view_at(w_atoms)
    m = law.dims[2]
    imp = (np.full(atoms, law.mean_out()) if view.importance is None
           else view.importance)
    classes = tuple(
        VertexClass(prob=1.0 / atoms, in_weights=[[w_atoms[k]]],
                    out_weights=[[out_atoms[k]]], holdings=view.holdings[k],
                    importance=imp[k], capital=view.capital[k], loss=0.0,
                    inst_type=0)
        for k in range(atoms))
    return FinitaryLaw(classes=classes, sale=law.sale, impact=law.impact)


def empirical_law(system: FinancialSystem) -> FinitaryLaw:
    """Finitary law with one class per distinct parameter tuple."""
    n = system.n
    flat = np.column_stack([
        system.in_weights.reshape(n, -1), system.out_weights.reshape(n, -1),
        system.holdings, system.importance, system.capital, system.loss,
        system.inst_type.astype(float),
    ])
    uniq, counts = np.unique(flat, axis=0, return_counts=True)
    r, t, m = system.dims
    k = r * t
    classes = []
    for row, c in zip(uniq, counts):
        classes.append(VertexClass(
            prob=c / n,
            in_weights=row[:k].reshape(r, t), out_weights=row[k:2 * k].reshape(r, t),
            holdings=row[2 * k:2 * k + m], importance=row[2 * k + m],
            capital=row[2 * k + m + 1], loss=row[2 * k + m + 2],
            inst_type=int(row[2 * k + m + 3]),
        ))
    return FinitaryLaw(classes=tuple(classes), sale=system.sale, impact=system.impact)


# ---------------------------------------------------------------------------
# JSON round-trip
# ---------------------------------------------------------------------------

def law_to_spec(law) -> dict:
    if isinstance(law, ShockedLaw):
        return {"shocked": {"kind": law.kind, "p": law.p},
                "base": law_to_spec(law.base)}
    if isinstance(law, FinitaryLaw):
        return {"finitary": [
            {"prob": c.prob, "w_minus": c.in_weights.tolist(),
             "w_plus": c.out_weights.tolist(), "x": c.holdings.tolist(),
             "s": c.importance, "c": _num(c.capital), "l": c.loss, "type": c.inst_type}
            for c in law.classes],
            "sale": fsys.sale_to_spec(law.sale), "impact": fsys.impact_to_spec(law.impact)}
    if isinstance(law, ParetoLaw):
        if not isinstance(law.dependence, str):
            raise TypeError("tail-function dependence has no file form")
        return {"pareto": {
            "beta_minus": law.beta_minus, "beta_plus": law.beta_plus,
            "wmin_minus": law.wmin_minus, "wmin_plus": law.wmin_plus,
            "dependence": law.dependence,
            "capital_rule": rule_to_spec(law.capital_rule),
            "importance_rule": _mark_to_spec(law.importance_rule),
            "holdings_rule": [_mark_to_spec(r) for r in law.holdings_rule],
        }, "sale": fsys.sale_to_spec(law.sale), "impact": fsys.impact_to_spec(law.impact)}
    raise TypeError(f"cannot serialize law {law!r}")


def law_from_spec(spec: dict):
    if "shocked" in spec:
        return ShockedLaw(base=law_from_spec(spec["base"]),
                          kind=spec["shocked"]["kind"], p=spec["shocked"]["p"])
    sale = fsys.sale_from_spec(spec.get("sale", {"kind": "indicator_at_default"}))
    impact = fsys.impact_from_spec(spec.get("impact", {"kind": "none"}))
    if "finitary" in spec:
        classes = tuple(VertexClass(
            prob=c["prob"], in_weights=np.asarray(c["w_minus"], dtype=float),
            out_weights=np.asarray(c["w_plus"], dtype=float),
            holdings=np.asarray(c.get("x", []), dtype=float),
            importance=c.get("s", 1.0), capital=float(c.get("c", np.inf)),
            loss=c.get("l", 0.0), inst_type=c.get("type", 0),
        ) for c in spec["finitary"])
        return FinitaryLaw(classes=classes, sale=sale, impact=impact)
    if "pareto" in spec:
        p = spec["pareto"]
        return ParetoLaw(
            beta_minus=p["beta_minus"], beta_plus=p["beta_plus"],
            wmin_minus=p.get("wmin_minus", 1.0), wmin_plus=p.get("wmin_plus", 1.0),
            dependence=p.get("dependence", "comonotone"),
            capital_rule=rule_from_spec(p.get("capital_rule", {"kind": "const", "v": np.inf})),
            importance_rule=_mark_from_spec(p.get("importance_rule", {"kind": "const", "v": 1.0})),
            holdings_rule=tuple(_mark_from_spec(r) for r in p.get("holdings_rule", [])),
            sale=sale, impact=impact,
        )
    raise ValueError("law spec must contain 'finitary' or 'pareto'")


def _num(x: float):
    return x if np.isfinite(x) else "inf"
