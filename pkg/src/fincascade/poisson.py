"""Poisson tail numerics: psi / phi for plain and weighted Poisson sums.

The contagion limit objects are built from two families:

* ``psi_tail(x, l) = P(Poi(x) >= l)`` and its density counterpart
  ``phi_point(x, l) = P(Poi(x) = l - 1)``, for the single-relation model;
* ``psi_general(spec, t) = P(sum_s s * Poi(q_s) >= t)`` and the sale-moment
  ``phi_general(spec, loss, capital, sale) = E[rho((Y + loss)/capital)]``
  for the weighted multi-relation model.

The weighted-sum law is computed by exact dilated convolution; each
component Poisson is truncated at the smallest k whose cumulative mass
reaches ``1 - 1e-14`` and everything past the requested support is lumped
into an explicit tail bucket, so both functionals remain exact up to the
truncation mass.  Rates are expected to be O(10) in these models; pmfs are
accumulated in linear space and rates above 700 are rejected.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, pdtr, pdtrc

__all__ = [
    "WeightedPoissonSpec",
    "psi_tail",
    "phi_point",
    "weighted_sum_pmf",
    "psi_general",
    "phi_general",
]

_TRUNC_TAIL = 1e-14
_MAX_RATE = 700.0


@dataclass(frozen=True)
class WeightedPoissonSpec:
    """Rates q_1..q_R of independent Poissons; summand s counts s units."""

    rates: tuple

    def __post_init__(self):
        r = np.asarray(self.rates, dtype=float)
        if r.ndim != 1 or r.size == 0:
            raise ValueError("rates must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(r)) or np.any(r < 0):
            raise ValueError("rates must be finite and nonnegative")
        if np.any(r > _MAX_RATE):
            raise ValueError(f"rates above {_MAX_RATE:g} are not supported")
        object.__setattr__(self, "rates", tuple(float(v) for v in r))


def psi_tail(x, l):
    """P(Poi(x) >= l);  l may be fractional (equivalent to ceil), 0 or inf.

    Vectorized over both arguments.
    """
    x = np.asarray(x, dtype=float)
    l = np.asarray(l, dtype=float)
    x, l = np.broadcast_arrays(x, l)
    out = np.empty(x.shape, dtype=float)
    trivial_one = l <= 0
    trivial_zero = np.isinf(l)
    mid = ~(trivial_one | trivial_zero)
    out[trivial_one] = 1.0
    out[trivial_zero] = 0.0
    if np.any(mid):
        k = np.ceil(l[mid]) - 1.0
        out[mid] = pdtrc(k, x[mid])
    return out if out.ndim else float(out)


def phi_point(x, l):
    """P(Poi(x) = l - 1) for integer l >= 1; 0 for l = 0 or l = inf."""
    x = np.asarray(x, dtype=float)
    l = np.asarray(l, dtype=float)
    x, l = np.broadcast_arrays(x, l)
    out = np.zeros(x.shape, dtype=float)
    ok = (l >= 1) & np.isfinite(l)
    if np.any(ok):
        k = np.ceil(l[ok]) - 1.0
        xs = x[ok]
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = np.where(xs > 0, k * np.log(np.maximum(xs, 1e-300)) - xs
                            - gammaln(k + 1.0), np.where(k == 0, 0.0, -np.inf))
        out[ok] = np.exp(logp)
    return out if out.ndim else float(out)


def _poisson_pmf_trunc(q: float) -> np.ndarray:
    """pmf of Poi(q) on 0..K where K is the smallest k with cdf >= 1 - 1e-14."""
    if q == 0.0:
        return np.array([1.0])
    kmax = int(q + 12.0 * np.sqrt(q) + 30.0)
    while pdtr(kmax, q) < 1.0 - _TRUNC_TAIL:
        kmax = int(kmax * 1.5) + 10
    k = np.arange(kmax + 1, dtype=float)
    pmf = np.exp(k * np.log(q) - q - gammaln(k + 1.0))
    cum = np.cumsum(pmf)
    cut = int(np.searchsorted(cum, 1.0 - _TRUNC_TAIL)) + 1
    return pmf[:cut]


def weighted_sum_pmf(spec: WeightedPoissonSpec, kmax: int):
    """pmf of Y = sum_s s*Poi(q_s) on {0..kmax} plus the lumped tail mass.

    Returns ``(pmf, tail)`` with ``pmf.sum() + tail == 1`` up to truncation.
    """
    if kmax < 0:
        raise ValueError("kmax must be >= 0")
    pmf = np.array([1.0])
    for s, q in enumerate(spec.rates, start=1):
        if q == 0.0:
            continue
        comp = _poisson_pmf_trunc(q)
        dil = np.zeros((len(comp) - 1) * s + 1)
        dil[::s] = comp
        pmf = np.convolve(pmf, dil)
        if len(pmf) > kmax + 1:
            # keep one overflow cell? no -- lump everything past kmax
            head = pmf[: kmax + 1].copy()
            pmf = head
    head = np.zeros(kmax + 1)
    head[: len(pmf)] = pmf
    tail = max(0.0, 1.0 - float(head.sum()))
    return head, tail


def psi_general(spec: WeightedPoissonSpec, t, strict: bool = False) -> float:
    """P(Y >= t)  (or P(Y > t) when ``strict``), Y = sum_s s*Poi(q_s).

    For non-integer t the two variants coincide; t <= 0 gives 1 (0 for the
    strict variant at t = 0 only when Y puts mass at 0 -- handled exactly),
    and t = +inf gives 0.
    """
    if np.isinf(t):
        return 0.0
    thr = int(np.floor(t)) + 1 if (strict and float(t).is_integer()) else int(np.ceil(t))
    if thr <= 0:
        return 1.0
    pmf, _tail = weighted_sum_pmf(spec, thr - 1)
    return float(np.clip(1.0 - pmf.sum(), 0.0, 1.0))


def phi_general(spec: WeightedPoissonSpec, loss: float, capital,
                sale, left_continuous: bool = False) -> float:
    """E[rho((Y + loss)/capital)] for the sale function ``rho``.

    ``capital = inf`` returns 0 (such institutions never sell).  The
    left-continuous modification of rho is used when flagged.
    """
    from .systems import eval_sale  # local import to avoid a cycle

    if np.isinf(capital):
        return 0.0
    if capital <= 0:
        raise ValueError("capital must be positive or +inf")
    kcap = int(np.ceil(max(capital - loss, 0.0)))
    pmf, tail = weighted_sum_pmf(spec, kcap)
    u = (np.arange(kcap + 1) + loss) / capital
    vals = eval_sale(sale, u, left_continuous=left_continuous)
    top = eval_sale(sale, np.array([max(1.0, (kcap + 1 + loss) / capital)]),
                    left_continuous=left_continuous)[0]
    return float(np.dot(pmf, vals) + tail * top)
