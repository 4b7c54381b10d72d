"""Capital rules: maps from institution characteristics to a capital floor.

A rule assigns each institution the minimal capital it must hold.  The
power-threshold family returns integer counts (thresholds against defaulted
neighbours); holdings-linear returns monetary capital against fire-sale
losses; combined adds both.  ``rounding`` on the power family selects how
the fractional power is turned into an integer threshold (ceil by default;
the shocked-buffer calibration uses floor, see resilience module).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConstCapital", "PowerThreshold", "MultiTypePower", "HoldingsLinear",
    "Combined", "RobustLargest", "eval_capital_rule",
    "rule_to_spec", "rule_from_spec",
]


@dataclass(frozen=True)
class ConstCapital:
    v: float

    def __post_init__(self):
        if not self.v >= 0:
            raise ValueError("capital must be nonnegative")


@dataclass(frozen=True)
class PowerThreshold:
    """tau(w) = max{floor, round(alpha * w^gamma)} with round = ceil | floor."""

    alpha: float
    gamma: float
    floor: int = 2
    rounding: str = "ceil"

    def __post_init__(self):
        if not (self.alpha > 0 and self.gamma >= 0):
            raise ValueError("need alpha > 0 and gamma >= 0")
        if self.floor < 2:
            raise ValueError("threshold floor must be >= 2")
        if self.rounding not in ("ceil", "floor"):
            raise ValueError("rounding must be 'ceil' or 'floor'")


@dataclass(frozen=True)
class MultiTypePower:
    """c(v) = max{floor, ceil(mu_b * (e(v)/||v||)^nu_b)} per type b.

    ``e(v) = sum_s s * sum_g w^{-,s,g} v[s, b, g]`` is the institution's
    v-weighted in-exposure (relation multiplicity counted); ``v`` is a full
    (R, T, T) direction laid out [relation, own type, counterparty type].
    The floor should be R+1 so that no single relation class is contagious.
    """

    mu: tuple
    nu: tuple
    v: tuple
    floor: int = 2

    def __post_init__(self):
        object.__setattr__(self, "mu", tuple(float(x) for x in self.mu))
        object.__setattr__(self, "nu", tuple(float(x) for x in self.nu))
        object.__setattr__(self, "v", tuple(float(x) for x in np.ravel(self.v)))
        if any(m <= 0 for m in self.mu) or any(x < 0 for x in self.nu):
            raise ValueError("need mu > 0 and nu >= 0")
        if any(x < 0 for x in self.v) or sum(self.v) <= 0:
            raise ValueError("direction v must be nonnegative and nonzero")
        if self.floor < 2:
            raise ValueError("floor must be >= 2")


@dataclass(frozen=True)
class HoldingsLinear:
    """c = theta . x (capital proportional to asset holdings)."""

    theta: tuple

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(x) for x in np.atleast_1d(self.theta)))
        if any(t <= 0 for t in self.theta):
            raise ValueError("theta must be positive")


@dataclass(frozen=True)
class Combined:
    """Threshold part plus theta . x fire-sale part."""

    direct: object
    theta: tuple

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(x) for x in np.atleast_1d(self.theta)))


@dataclass(frozen=True)
class RobustLargest:
    """Capital at least the sum of the tau-1 largest realized exposures."""

    tau_rule: PowerThreshold


def eval_capital_rule(rule, w_minus=None, holdings=None, inst_type=None,
                      exposures=None, in_weights=None):
    """Capital assigned by ``rule``; vectorized over institutions.

    w_minus: (k,) total in-weights; holdings: (k, M); inst_type: (k,) ints;
    in_weights: (k, R, T) per-relation in-weights for the multi-type rule;
    exposures: list of per-institution exposure arrays for the robust rule.
    """
    if isinstance(rule, ConstCapital):
        k = _count(w_minus, holdings, exposures)
        return np.full(k, rule.v)
    if isinstance(rule, PowerThreshold):
        w = np.asarray(w_minus, dtype=float)
        raw = rule.alpha * np.power(w, rule.gamma)
        rounded = np.ceil(raw) if rule.rounding == "ceil" else np.floor(raw)
        return np.maximum(float(rule.floor), rounded)
    if isinstance(rule, HoldingsLinear):
        x = np.atleast_2d(np.asarray(holdings, dtype=float))
        return x @ np.asarray(rule.theta)
    if isinstance(rule, Combined):
        return (eval_capital_rule(rule.direct, w_minus=w_minus, holdings=holdings,
                                  inst_type=inst_type, in_weights=in_weights)
                + np.atleast_2d(np.asarray(holdings, dtype=float)) @ np.asarray(rule.theta))
    if isinstance(rule, MultiTypePower):
        iw = np.asarray(in_weights, dtype=float)
        r_dim, t_dim = iw.shape[1], iw.shape[2]
        v = np.asarray(rule.v).reshape(r_dim, t_dim, t_dim)
        own = np.asarray(inst_type, dtype=np.int64)
        vv = np.moveaxis(v[:, own, :], 1, 0)           # (k, R, T) slice v[s, type_i, g]
        mult = np.arange(1, r_dim + 1, dtype=float)
        e = np.einsum("ksg,ksg,s->k", iw, vv, mult)
        mu = np.asarray(rule.mu)[own]
        nu = np.asarray(rule.nu)[own]
        raw = mu * np.power(e / v.sum(), nu)
        return np.maximum(float(rule.floor), np.ceil(raw))
    if isinstance(rule, RobustLargest):
        if exposures is None:
            raise ValueError("robust rule needs the realized exposure lists")
        tau = eval_capital_rule(rule.tau_rule, w_minus=w_minus)
        out = np.empty(len(exposures))
        for i, ex in enumerate(exposures):
            ex = np.sort(np.asarray(ex, dtype=float))[::-1]
            out[i] = ex[: max(int(tau[i]) - 1, 0)].sum()
        return out
    raise TypeError(f"unknown capital rule {rule!r}")


def _count(*candidates):
    for c in candidates:
        if c is not None:
            return len(c)
    raise ValueError("cannot infer institution count for a constant rule")


def rule_to_spec(rule) -> dict:
    if isinstance(rule, ConstCapital):
        return {"kind": "const", "v": rule.v}
    if isinstance(rule, PowerThreshold):
        return {"kind": "power", "alpha": rule.alpha, "gamma": rule.gamma,
                "floor": rule.floor, "rounding": rule.rounding}
    if isinstance(rule, HoldingsLinear):
        return {"kind": "linear_holdings", "theta": list(rule.theta)}
    if isinstance(rule, Combined):
        return {"kind": "combined", "direct": rule_to_spec(rule.direct),
                "theta": list(rule.theta)}
    if isinstance(rule, MultiTypePower):
        return {"kind": "multitype_power", "mu": list(rule.mu), "nu": list(rule.nu),
                "v": list(rule.v), "floor": rule.floor}
    if isinstance(rule, RobustLargest):
        return {"kind": "robust_largest", "tau_rule": rule_to_spec(rule.tau_rule)}
    raise TypeError(f"cannot serialize rule {rule!r}")


def rule_from_spec(spec: dict):
    kind = spec["kind"]
    if kind == "const":
        return ConstCapital(v=spec["v"])
    if kind == "power":
        return PowerThreshold(alpha=spec["alpha"], gamma=spec["gamma"],
                              floor=spec.get("floor", 2),
                              rounding=spec.get("rounding", "ceil"))
    if kind == "linear_holdings":
        return HoldingsLinear(theta=tuple(spec["theta"]))
    if kind == "combined":
        return Combined(direct=rule_from_spec(spec["direct"]), theta=tuple(spec["theta"]))
    if kind == "multitype_power":
        return MultiTypePower(mu=tuple(spec["mu"]), nu=tuple(spec["nu"]),
                              v=tuple(spec["v"]), floor=spec.get("floor", 2))
    if kind == "robust_largest":
        return RobustLargest(tau_rule=rule_from_spec(spec["tau_rule"]))
    raise ValueError(f"unknown rule kind {kind!r}")
