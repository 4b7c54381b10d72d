"""Concrete financial systems, sale functions and price-impact functions.

A :class:`FinancialSystem` is the finite-n object every cascade runs on:
per-institution relation weights, asset holdings, systemic importance,
capital and exogenous loss, plus one sale function rho and one price-impact
function h shared by the whole system.  Systems are treated as immutable;
shock operations return modified copies.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .rng import substream

__all__ = [
    "IndicatorAtDefault", "PowerSale", "LeverageLinear", "PiecewiseMonotone",
    "LinearImpact", "LogLinearImpact", "PowerBoundedImpact", "CrossImpact",
    "FinancialSystem", "ShockRule",
    "eval_sale", "eval_impact", "exogenous_asset_shock", "ex_post_default",
    "sale_to_spec", "sale_from_spec", "impact_to_spec", "impact_from_spec",
    "save_system", "load_system",
]


# ---------------------------------------------------------------------------
# sale functions: nondecreasing rho: [0, inf) -> [0, 1], rho(0) = 0,
# constant at rho(1) past u = 1
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IndicatorAtDefault:
    """rho(u) = 1{u >= 1}: sell everything at default, nothing before."""


@dataclass(frozen=True)
class PowerSale:
    """rho(u) = 1 ∧ u^q."""

    q: float

    def __post_init__(self):
        if not self.q > 0:
            raise ValueError("PowerSale exponent must be positive")


@dataclass(frozen=True)
class LeverageLinear:
    """rho(u) = (1 - (1-u) * lam_max / lam)^+ clipped at 1."""

    lam: float
    lam_max: float

    def __post_init__(self):
        if not (0 < self.lam <= self.lam_max):
            raise ValueError("need 0 < lam <= lam_max (else rho(0) != 0)")


@dataclass(frozen=True)
class PiecewiseMonotone:
    """Monotone piecewise-linear table ((u_0,v_0), ..., (u_k,v_k)).

    Interpolated linearly, 0 below the first knot, v_k above the last;
    the table must start at (0, 0) or above u=0 and be nondecreasing with
    values in [0, 1].
    """

    table: tuple

    def __post_init__(self):
        t = tuple((float(u), float(v)) for u, v in self.table)
        us = [u for u, _ in t]
        vs = [v for _, v in t]
        if len(t) < 1 or sorted(us) != us or sorted(vs) != vs:
            raise ValueError("table must be nondecreasing in u and v")
        if min(vs) < 0 or max(vs) > 1 or us[0] < 0:
            raise ValueError("values must lie in [0,1], knots in [0,inf)")
        if us[0] == 0 and vs[0] != 0:
            raise ValueError("rho(0) must be 0")
        object.__setattr__(self, "table", t)


def eval_sale(sale, u, left_continuous: bool = False):
    """Evaluate rho (or its left-continuous modification) at u >= 0."""
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    if isinstance(sale, IndicatorAtDefault):
        out = (u > 1.0).astype(float) if left_continuous else (u >= 1.0).astype(float)
    elif isinstance(sale, PowerSale):
        out = np.minimum(np.maximum(u, 0.0) ** sale.q, 1.0)
    elif isinstance(sale, LeverageLinear):
        out = np.clip(1.0 - (1.0 - u) * sale.lam_max / sale.lam, 0.0, 1.0)
    elif isinstance(sale, PiecewiseMonotone):
        us = np.array([p[0] for p in sale.table])
        vs = np.array([p[1] for p in sale.table])
        out = np.interp(u, us, vs, left=0.0, right=vs[-1])
    else:
        raise TypeError(f"unknown sale function {sale!r}")
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# price impact: continuous nondecreasing h: R_+^M -> [0,1]^M
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearImpact:
    mu: tuple

    def __post_init__(self):
        object.__setattr__(self, "mu", _pos_tuple(self.mu, "mu"))


@dataclass(frozen=True)
class LogLinearImpact:
    """h^m(chi) = 1 - exp(-alpha_m * chi_m)."""

    alpha: tuple

    def __post_init__(self):
        object.__setattr__(self, "alpha", _pos_tuple(self.alpha, "alpha"))


@dataclass(frozen=True)
class PowerBoundedImpact:
    """h^m(chi) = min(mu_m * chi_m^nu_m, 1)."""

    mu: tuple
    nu: tuple

    def __post_init__(self):
        object.__setattr__(self, "mu", _pos_tuple(self.mu, "mu"))
        object.__setattr__(self, "nu", _pos_tuple(self.nu, "nu"))


@dataclass(frozen=True)
class CrossImpact:
    """Arbitrary monotone cross-impact map chi -> [0,1]^M (callable)."""

    fn: object
    m: int


def _pos_tuple(v, name):
    t = tuple(float(x) for x in np.atleast_1d(np.asarray(v, dtype=float)))
    if any(x < 0 for x in t):
        raise ValueError(f"{name} must be nonnegative")
    return t


def eval_impact(impact, chi):
    """h(chi) componentwise; accepts scalar chi for M=1."""
    chi = np.atleast_1d(np.asarray(chi, dtype=float))
    if isinstance(impact, LinearImpact):
        return np.minimum(np.array(impact.mu) * chi, 1.0)
    if isinstance(impact, LogLinearImpact):
        return 1.0 - np.exp(-np.array(impact.alpha) * chi)
    if isinstance(impact, PowerBoundedImpact):
        return np.minimum(np.array(impact.mu) * chi ** np.array(impact.nu), 1.0)
    if isinstance(impact, CrossImpact):
        out = np.asarray(impact.fn(chi), dtype=float)
        if out.shape != chi.shape:
            raise ValueError("cross impact must map M-vectors to M-vectors")
        return out
    raise TypeError(f"unknown price impact {impact!r}")


# ---------------------------------------------------------------------------
# finite systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FinancialSystem:
    """n institutions with (R, T, M) dimensions.

    in_weights / out_weights have shape (n, R, T): entry [i, r, t] is the
    propensity of institution i to receive/send a relation-(r+1) edge
    from/to counterparties of type t.  holdings is (n, M); capital may be
    +inf (never defaults, never sells).  loss_assets optionally carries the
    per-asset split of the exogenous loss (needed by the multiplicative
    shock-compounding mode of the fire-sales engine); its row sums equal
    ``loss``.
    """

    in_weights: np.ndarray
    out_weights: np.ndarray
    holdings: np.ndarray
    importance: np.ndarray
    capital: np.ndarray
    loss: np.ndarray
    inst_type: np.ndarray
    sale: object = field(default_factory=IndicatorAtDefault)
    impact: object = None
    loss_assets: np.ndarray = None

    def __post_init__(self):
        inw = np.atleast_3d(np.asarray(self.in_weights, dtype=float))
        outw = np.atleast_3d(np.asarray(self.out_weights, dtype=float))
        n = inw.shape[0]
        hold = np.asarray(self.holdings, dtype=float).reshape(n, -1)
        object.__setattr__(self, "in_weights", inw)
        object.__setattr__(self, "out_weights", outw)
        object.__setattr__(self, "holdings", hold)
        object.__setattr__(self, "importance", np.asarray(self.importance, dtype=float).reshape(n))
        object.__setattr__(self, "capital", np.asarray(self.capital, dtype=float).reshape(n))
        object.__setattr__(self, "loss", np.asarray(self.loss, dtype=float).reshape(n))
        object.__setattr__(self, "inst_type", np.asarray(self.inst_type, dtype=np.int64).reshape(n))
        if self.loss_assets is not None:
            object.__setattr__(self, "loss_assets",
                               np.asarray(self.loss_assets, dtype=float).reshape(n, -1))
        if outw.shape != inw.shape:
            raise ValueError("in/out weight shapes differ")
        for name in ("in_weights", "out_weights", "holdings", "importance"):
            if np.any(getattr(self, name) < 0):
                raise ValueError(f"{name} must be nonnegative")
        if np.any(self.loss < 0) or not np.all(np.isfinite(self.loss)):
            raise ValueError("losses must be finite and nonnegative")
        if np.any(self.capital < 0):
            raise ValueError("capital must be nonnegative (inf allowed)")
        if np.any((self.inst_type < 0) | (self.inst_type >= self.dims[1])):
            raise ValueError("inst_type out of range")
        if self.impact is None and self.dims[2] > 0:
            raise ValueError("a price impact is required when M >= 1")

    @property
    def n(self) -> int:
        return self.in_weights.shape[0]

    @property
    def dims(self) -> tuple:
        r, t = self.in_weights.shape[1], self.in_weights.shape[2]
        return r, t, self.holdings.shape[1]

    def with_fields(self, **kw) -> "FinancialSystem":
        return replace(self, **kw)


@dataclass(frozen=True)
class ShockRule:
    """Ex-post infection rule: who gets knocked out, and how hard.

    kind: 'uniform' (floor(p n) uniformly chosen), 'largest' (the floor(p n)
    largest institutions by total in+out weight) or 'per_type' (per-type
    fractions).  Selected institutions receive loss = capital_multiple * c_i;
    the default multiple 2 guarantees insolvency even under weak-inequality
    default tests.
    """

    kind: str = "uniform"
    p: float = 0.0
    per_type: tuple = ()
    capital_multiple: float = 2.0

    def __post_init__(self):
        if self.kind not in ("uniform", "largest", "per_type"):
            raise ValueError(f"unknown shock rule kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")


def exogenous_asset_shock(system: FinancialSystem, price_shocks, prices=None) -> FinancialSystem:
    """Overwrite losses with l_i = sum_m x_i^m * delta_i^m * p^m.

    ``price_shocks`` is an (M,) vector applied to everyone or an (n, M)
    matrix of idiosyncratic relative price drops in [0, 1]; ``prices``
    defaults to 1.
    """
    n, m = system.holdings.shape
    delta = np.asarray(price_shocks, dtype=float)
    delta = np.broadcast_to(delta, (n, m)) if delta.ndim <= 1 else delta.reshape(n, m)
    if np.any(delta < 0) or np.any(delta > 1):
        raise ValueError("price shocks must lie in [0, 1]")
    p = np.ones(m) if prices is None else np.asarray(prices, dtype=float).reshape(m)
    per_asset = system.holdings * delta * p
    return system.with_fields(loss=per_asset.sum(axis=1), loss_assets=per_asset)


def ex_post_default(system: FinancialSystem, rule: ShockRule, seed: int = 0) -> FinancialSystem:
    """Apply an ex-post infection: selected institutions get loss = mult * c_i.

    Institutions with infinite capital cannot be infected and are excluded
    from selection.  Selection size is floor(p * n) (not binomial).
    """
    n = system.n
    eligible = np.flatnonzero(np.isfinite(system.capital))
    if rule.kind == "uniform":
        k = int(np.floor(rule.p * n))
        rng = substream(seed, "expost")
        chosen = rng.choice(eligible, size=min(k, eligible.size), replace=False)
    elif rule.kind == "largest":
        k = int(np.floor(rule.p * n))
        tot = system.in_weights.sum(axis=(1, 2)) + system.out_weights.sum(axis=(1, 2))
        order = eligible[np.argsort(-tot[eligible], kind="stable")]
        chosen = order[:k]
    else:  # per_type
        if len(rule.per_type) != system.dims[1]:
            raise ValueError("per_type needs one probability per type")
        rng = substream(seed, "expost")
        parts = []
        for t, pt in enumerate(rule.per_type):
            idx = eligible[system.inst_type[eligible] == t]
            k = int(np.floor(pt * (system.inst_type == t).sum()))
            parts.append(rng.choice(idx, size=min(k, idx.size), replace=False))
        chosen = np.concatenate(parts) if parts else np.empty(0, dtype=int)
    loss = system.loss.copy()
    loss[chosen] = rule.capital_multiple * system.capital[chosen]
    la = system.loss_assets
    if la is not None:
        la = la.copy()
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(system.loss[chosen] > 0,
                             loss[chosen] / np.maximum(system.loss[chosen], 1e-300), 0.0)
        la[chosen] = la[chosen] * scale[:, None]
        zero_before = system.loss[chosen] == 0
        if np.any(zero_before) and la.shape[1] > 0:
            # spread the infection loss over holdings (or the first asset)
            hold = system.holdings[chosen][zero_before]
            tot = hold.sum(axis=1, keepdims=True)
            frac = np.where(tot > 0, hold / np.maximum(tot, 1e-300), 0.0)
            if frac.shape[1] > 0:
                frac[tot[:, 0] == 0, 0] = 1.0
            la[chosen[zero_before]] = frac * loss[chosen][zero_before, None]
    return system.with_fields(loss=loss, loss_assets=la)


# ---------------------------------------------------------------------------
# file I/O: columnar CSV (one row per institution) + JSON sidecar
# ---------------------------------------------------------------------------

def save_system(system: FinancialSystem, path_prefix) -> None:
    """Write prefix.csv (type, in-weights, out-weights, holdings, s, c, l)
    and prefix.json (dims, sale, impact)."""
    prefix = Path(path_prefix)
    r, t, m = system.dims
    cols = ["type"]
    cols += [f"in_w_r{i}_t{j}" for i in range(r) for j in range(t)]
    cols += [f"out_w_r{i}_t{j}" for i in range(r) for j in range(t)]
    cols += [f"x_{k}" for k in range(m)] + ["s", "c", "l"]
    mat = np.column_stack([
        system.inst_type.astype(float),
        system.in_weights.reshape(system.n, -1),
        system.out_weights.reshape(system.n, -1),
        system.holdings,
        system.importance, system.capital, system.loss,
    ])
    np.savetxt(prefix.with_suffix(".csv"), mat, fmt="%.17g",
               delimiter=",", header=",".join(cols), comments="")
    sidecar = {"n": system.n, "dims": [r, t, m],
               "sale": sale_to_spec(system.sale),
               "impact": impact_to_spec(system.impact)}
    prefix.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))


def load_system(path_prefix) -> FinancialSystem:
    prefix = Path(path_prefix)
    sidecar = json.loads(prefix.with_suffix(".json").read_text())
    r, t, m = sidecar["dims"]
    mat = np.loadtxt(prefix.with_suffix(".csv"), delimiter=",", skiprows=1, ndmin=2)
    n = mat.shape[0]
    k = r * t
    return FinancialSystem(
        in_weights=mat[:, 1:1 + k].reshape(n, r, t),
        out_weights=mat[:, 1 + k:1 + 2 * k].reshape(n, r, t),
        holdings=mat[:, 1 + 2 * k:1 + 2 * k + m].reshape(n, m),
        importance=mat[:, 1 + 2 * k + m],
        capital=mat[:, 2 + 2 * k + m],
        loss=mat[:, 3 + 2 * k + m],
        inst_type=mat[:, 0].astype(np.int64),
        sale=sale_from_spec(sidecar["sale"]),
        impact=impact_from_spec(sidecar["impact"]),
    )


# ---------------------------------------------------------------------------
# spec (JSON round-trip) helpers
# ---------------------------------------------------------------------------

def sale_to_spec(sale) -> dict:
    if isinstance(sale, IndicatorAtDefault):
        return {"kind": "indicator_at_default"}
    if isinstance(sale, PowerSale):
        return {"kind": "power", "q": sale.q}
    if isinstance(sale, LeverageLinear):
        return {"kind": "leverage_linear", "lam": sale.lam, "lam_max": sale.lam_max}
    if isinstance(sale, PiecewiseMonotone):
        return {"kind": "piecewise", "table": [list(p) for p in sale.table]}
    raise TypeError(f"cannot serialize sale {sale!r}")


def sale_from_spec(spec: dict):
    kind = spec["kind"]
    if kind == "indicator_at_default":
        return IndicatorAtDefault()
    if kind == "power":
        return PowerSale(q=spec["q"])
    if kind == "leverage_linear":
        return LeverageLinear(lam=spec["lam"], lam_max=spec["lam_max"])
    if kind == "piecewise":
        return PiecewiseMonotone(table=tuple(tuple(p) for p in spec["table"]))
    raise ValueError(f"unknown sale kind {kind!r}")


def impact_to_spec(impact) -> dict:
    if impact is None:
        return {"kind": "none"}
    if isinstance(impact, LinearImpact):
        return {"kind": "linear", "mu": list(impact.mu)}
    if isinstance(impact, LogLinearImpact):
        return {"kind": "log_linear", "alpha": list(impact.alpha)}
    if isinstance(impact, PowerBoundedImpact):
        return {"kind": "power_bounded", "mu": list(impact.mu), "nu": list(impact.nu)}
    raise TypeError(f"cannot serialize impact {impact!r}")


def impact_from_spec(spec: dict):
    kind = spec["kind"]
    if kind == "none":
        return None
    if kind == "linear":
        return LinearImpact(mu=tuple(spec["mu"]))
    if kind == "log_linear":
        return LogLinearImpact(alpha=tuple(spec["alpha"]))
    if kind == "power_bounded":
        return PowerBoundedImpact(mu=tuple(spec["mu"]), nu=tuple(spec["nu"]))
    raise ValueError(f"unknown impact kind {kind!r}")
