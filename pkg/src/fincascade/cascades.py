"""Finite-network contagion engines.

Three processes on an explicit :class:`~fincascade.networks.ExposureNetwork`
over a :class:`~fincascade.systems.FinancialSystem`:

* pure default cascades (counterparty losses only),
* pure fire sales (price-mediated losses only), and
* the combined process, in three flavours: the round-by-round simultaneous
  update, and the equilibrium upper / strict lower brackets that sandwich
  every intermediate outcome.

All engines are deterministic and single-threaded; Monte Carlo over networks
is embarrassingly parallel at the trial level.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .networks import ExposureNetwork, _ragged_prefix
from .systems import FinancialSystem, IndicatorAtDefault, eval_impact, eval_sale

__all__ = [
    "CascadeResult", "NonConvergence",
    "run_default_cascade", "run_fire_sales", "run_combined",
]

TOL_SOLD = 1e-10       # relative sup-norm tolerance on the sold vector
MAX_ROUNDS = 10 ** 6   # cap for tolerance-based fixed-point iteration


class NonConvergence(RuntimeError):
    """Fixed-point iteration hit the round cap before stabilising.

    Carries the last sold-share iterate and the sup-norm residual of the
    final update so callers can inspect how far the run got.
    """

    def __init__(self, message, last_sold, residual, rounds):
        super().__init__(message)
        self.last_sold = np.asarray(last_sold, dtype=float)
        self.residual = float(residual)
        self.rounds = int(rounds)


@dataclass(frozen=True)
class CascadeResult:
    """Terminal state of a contagion run.

    defaulted: sorted institution indices; damage: total importance of the
    defaulted; sold: finally sold shares divided by n, one entry per asset;
    rounds: number of rounds that changed the state; trajectory: optional
    per-round tuples (defaulted count, sold vector).
    """

    defaulted: np.ndarray
    damage: float
    sold: np.ndarray
    rounds: int
    trajectory: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "defaulted",
                           np.asarray(self.defaulted, dtype=np.int64))
        object.__setattr__(self, "sold", np.asarray(self.sold, dtype=float))

    @property
    def default_count(self) -> int:
        return self.defaulted.size

    def write_trajectory(self, path) -> None:
        """Dump the per-round trajectory as CSV (round, defaults, sold...)."""
        if self.trajectory is None:
            raise ValueError("run was made without record_trajectory=True")
        import csv

        m = self.sold.size
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["round", "defaults"] + [f"sold_{j}" for j in range(m)])
            for k, (d, sold) in enumerate(self.trajectory):
                w.writerow([k, d] + [f"{s:.17g}" for s in sold])


# ---------------------------------------------------------------------------
# adjacency and loss pushing
# ---------------------------------------------------------------------------

def _out_adjacency(network: ExposureNetwork, exposure: str):
    """CSR-by-source view (indptr, dst, weight) of the network.

    exposure='multiplicity' sends r units of loss along a multiplicity-r
    edge; 'marks' sends the monetary mark attached to the edge.
    """
    if exposure == "multiplicity":
        w = network.mult.astype(float)
    elif exposure == "marks":
        if network.marks is None:
            raise ValueError("network carries no marks; "
                             "attach exposures or use exposure='multiplicity'")
        w = network.marks
    else:
        raise ValueError(f"unknown exposure mode {exposure!r}")
    order = np.argsort(network.src, kind="stable")
    indptr = np.zeros(network.n + 1, dtype=np.int64)
    np.cumsum(np.bincount(network.src, minlength=network.n), out=indptr[1:])
    return indptr, network.dst[order], w[order]


def _push(indptr, dst, w, frontier, rec):
    """Add every frontier member's outgoing losses into rec (in place)."""
    cnt = indptr[frontier + 1] - indptr[frontier]
    if not cnt.sum():
        return
    rows, ranks = _ragged_prefix(cnt)
    e = indptr[frontier][rows] + ranks
    rec += np.bincount(dst[e], weights=w[e], minlength=rec.size)


def _cascade_default_set(n, adj, base, capital, strict=False):
    """Least fixed point of the default round map, by frontier propagation.

    base is the per-institution loss already on the books before any
    counterparty defaults.  Returns (defaulted bool mask, received
    counterparty losses, propagation rounds beyond the seed round).
    """
    indptr, dst, w = adj
    rec = np.zeros(n)
    below = (base > capital) if strict else (base >= capital)
    defaulted = below.copy()
    frontier = np.flatnonzero(below)
    rounds = 0
    counts = [int(defaulted.sum())]
    while frontier.size:
        _push(indptr, dst, w, frontier, rec)
        if strict:
            hit = (base + rec > capital) & ~defaulted
        else:
            hit = (base + rec >= capital) & ~defaulted
        frontier = np.flatnonzero(hit)
        if frontier.size:
            defaulted[frontier] = True
            rounds += 1
            counts.append(int(defaulted.sum()))
    return defaulted, rec, rounds, counts


def run_default_cascade(system: FinancialSystem, network: ExposureNetwork,
                        exposure: str = "multiplicity",
                        record_trajectory: bool = False,
                        strict: bool = False) -> CascadeResult:
    """Pure default contagion: no asset sales, losses travel along edges.

    In every round, each institution whose exogenous loss plus the losses
    received from previously defaulted counterparties weakly exceeds its
    capital joins the default set.  Terminates in at most n - 1 propagation
    rounds.
    """
    if network.n != system.n:
        raise ValueError("network and system sizes differ")
    adj = _out_adjacency(network, exposure)
    defaulted, _, rounds, counts = _cascade_default_set(
        system.n, adj, system.loss, system.capital, strict=strict)
    m = system.dims[2]
    idx = np.flatnonzero(defaulted)
    traj = tuple((c, (0.0,) * m) for c in counts) if record_trajectory else None
    return CascadeResult(defaulted=idx,
                         damage=float(system.importance[idx].sum()),
                         sold=np.zeros(m), rounds=rounds, trajectory=traj)


# ---------------------------------------------------------------------------
# fire sales
# ---------------------------------------------------------------------------

def _stress(base, press, capital, strict):
    """Loss-to-capital ratios; infinite capital gives 0, zero capital inf.

    Under the strict (lower-bracket) convention a zero-capital institution
    with zero losses is treated as sound, so its ratio is 0 rather than inf.
    """
    num = base + press
    with np.errstate(divide="ignore", invalid="ignore"):
        u = num / capital
    if strict:
        u = np.where(capital > 0, u, np.where(num > 0, np.inf, 0.0))
    else:
        u = np.where(capital > 0, u, np.inf)
    u[np.isinf(capital) & np.isfinite(num)] = 0.0
    return u


def _sales_fixed_point(system, base, chi0, strict, tol, cap, on_round=None):
    """Iterate the selling round map from chi0 to its least fixed point.

    For the indicator sale function the recursion is exact and stops as
    soon as the seller set stops growing (at most n rounds).  Otherwise
    iteration stops when the sold vector moves by less than tol relatively;
    hitting the cap raises :class:`NonConvergence`.
    """
    x = system.holdings
    capital = system.capital
    indicator = isinstance(system.sale, IndicatorAtDefault)
    chi = np.asarray(chi0, dtype=float).copy()
    rounds = 0
    for _ in range(cap):
        press = x @ eval_impact(system.impact, chi)
        u = _stress(base, press, capital, strict)
        rho = eval_sale(system.sale, u, left_continuous=strict)
        chi_new = (x * rho[:, None]).sum(axis=0) / system.n
        delta = float(np.max(np.abs(chi_new - chi))) if chi.size else 0.0
        if on_round is not None:
            on_round(u, chi_new)
        if indicator:
            if delta == 0.0 and np.array_equal(chi_new, chi):
                return chi, rounds
        elif delta <= tol * max(1.0, float(np.max(np.abs(chi_new)))):
            return chi_new, rounds + (delta > 0.0)
        chi = chi_new
        rounds += 1
    raise NonConvergence(
        f"fire sales did not stabilise within {cap} rounds",
        last_sold=chi, residual=delta, rounds=rounds)


def run_fire_sales(system: FinancialSystem, variant: str = "upper",
                   record_trajectory: bool = False,
                   tol: float = TOL_SOLD,
                   max_rounds: int = MAX_ROUNDS) -> CascadeResult:
    """Pure fire sales: losses spread only through the asset prices.

    variant='upper' uses the sale function as given together with weak
    default inequalities; variant='lower' uses its left-continuous
    modification and strict inequalities, bounding the sales process from
    below when the sale function jumps.
    """
    if variant not in ("upper", "lower"):
        raise ValueError(f"unknown fire-sales variant {variant!r}")
    if system.dims[2] < 1:
        raise ValueError("fire sales need at least one asset (M >= 1)")
    strict = variant == "lower"
    cap = system.n + 2 if isinstance(system.sale, IndicatorAtDefault) \
        else max_rounds
    traj = [] if record_trajectory else None

    def snap(u, chi_new):
        if traj is not None:
            d = int(((u > 1.0) if strict else (u >= 1.0)).sum())
            traj.append((d, tuple(chi_new)))

    chi, rounds = _sales_fixed_point(system, system.loss, np.zeros(system.dims[2]),
                                     strict, tol, cap, on_round=snap)
    press = system.holdings @ eval_impact(system.impact, chi)
    u = _stress(system.loss, press, system.capital, strict)
    idx = np.flatnonzero((u > 1.0) if strict else (u >= 1.0))
    return CascadeResult(defaulted=idx,
                         damage=float(system.importance[idx].sum()),
                         sold=chi, rounds=rounds,
                         trajectory=tuple(traj) if traj is not None else None)


# ---------------------------------------------------------------------------
# combined process
# ---------------------------------------------------------------------------

def _combined_simultaneous(system, adj, record, tol, max_rounds):
    n, m = system.n, system.dims[2]
    x, capital, loss = system.holdings, system.capital, system.loss
    indicator = isinstance(system.sale, IndicatorAtDefault)
    cap = 2 * n + 2 if indicator else max_rounds
    indptr, dst, w = adj
    rec = np.zeros(n)
    chi = np.zeros(m)
    defaulted = np.zeros(n, dtype=bool)
    rounds = 0
    traj = [] if record else None
    for _ in range(cap):
        press = x @ eval_impact(system.impact, chi)
        u = _stress(loss + rec, press, capital, strict=False)
        hit = u >= 1.0
        rho = eval_sale(system.sale, u)
        chi_new = (x * rho[:, None]).sum(axis=0) / n
        frontier = np.flatnonzero(hit & ~defaulted)
        delta = float(np.max(np.abs(chi_new - chi))) if m else 0.0
        grew = frontier.size > 0
        if traj is not None:
            traj.append((int((defaulted | hit).sum()), tuple(chi_new)))
        if grew:
            defaulted[frontier] = True
            _push(indptr, dst, w, frontier, rec)
        if indicator:
            if not grew and delta == 0.0:
                break
        elif not grew and delta <= tol * max(1.0, float(np.max(np.abs(chi_new)))):
            chi = chi_new
            rounds += delta > 0.0
            break
        chi = chi_new
        rounds += 1
    else:
        raise NonConvergence(
            f"combined cascade did not stabilise within {cap} rounds",
            last_sold=chi, residual=delta, rounds=rounds)
    return defaulted, chi, rounds, traj


def _combined_alternating(system, adj, strict, record, tol, max_rounds):
    """Full default cascade, then full fire-sales fixed point, repeated.

    With the sale function as given and weak inequalities this converges to
    the smallest joint equilibrium (the upper bracket); with strict
    inequalities and the left-continuous sale modification it yields the
    lower bracket.  Stages whose inputs are unchanged from the previous
    sweep are skipped, so degenerate instances terminate exactly.
    """
    n, m = system.n, system.dims[2]
    x, capital, loss = system.holdings, system.capital, system.loss
    indicator = isinstance(system.sale, IndicatorAtDefault)
    outer_cap = n + 2 if indicator else max_rounds
    inner_cap = n + 2 if indicator else max_rounds
    chi = np.zeros(m)
    defaulted = np.zeros(n, dtype=bool)
    rec = np.zeros(n)
    prev_eff = None
    prev_base = None
    rounds = 0
    traj = [] if record else None
    for _ in range(outer_cap):
        eff = loss + x @ eval_impact(system.impact, chi)
        if prev_eff is not None and np.array_equal(eff, prev_eff):
            cascade_moved = False
        else:
            was = int(defaulted.sum())
            defaulted, rec, _, _ = _cascade_default_set(
                n, adj, eff, capital, strict=strict)
            cascade_moved = int(defaulted.sum()) != was
            prev_eff = eff
        base = loss + rec
        if prev_base is not None and np.array_equal(base, prev_base):
            sales_moved = False
        else:
            chi_new, _ = _sales_fixed_point(system, base, chi, strict,
                                            tol, inner_cap)
            delta = float(np.max(np.abs(chi_new - chi))) if m else 0.0
            if indicator:
                sales_moved = delta > 0.0
            else:
                sales_moved = delta > tol * max(1.0, float(np.max(np.abs(chi_new))))
            chi = chi_new
            prev_base = base
        if traj is not None:
            traj.append((int(defaulted.sum()), tuple(chi)))
        if not cascade_moved and not sales_moved:
            break
        rounds += 1
    else:
        raise NonConvergence(
            f"alternating cascade did not stabilise within {outer_cap} sweeps",
            last_sold=chi, residual=float("nan"), rounds=rounds)
    return defaulted, chi, rounds, traj


def run_combined(system: FinancialSystem, network: ExposureNetwork,
                 mode: str = "equilibrium_upper",
                 exposure: str = "multiplicity",
                 record_trajectory: bool = False,
                 tol: float = TOL_SOLD,
                 max_rounds: int = MAX_ROUNDS) -> CascadeResult:
    """Joint default-contagion / fire-sales process.

    mode='simultaneous' runs the round-by-round alternating update in which
    both channels react to the previous round only.  mode='equilibrium_upper'
    repeats (full default cascade, full fire-sales fixed point) until stable,
    giving the smallest joint equilibrium, an upper bound on the simultaneous
    outcome.  mode='strict_lower' does the same with strict default
    inequalities and the left-continuous sale modification, giving a lower
    bound.  A network without edges reduces to :func:`run_fire_sales` and a
    system without holdings to :func:`run_default_cascade`, bit for bit.
    """
    if mode not in ("simultaneous", "equilibrium_upper", "strict_lower"):
        raise ValueError(f"unknown combined mode {mode!r}")
    if network.n != system.n:
        raise ValueError("network and system sizes differ")
    strict = mode == "strict_lower"
    if system.dims[2] == 0 or not system.holdings.any():
        return run_default_cascade(system, network, exposure=exposure,
                                   record_trajectory=record_trajectory,
                                   strict=strict)
    if network.edge_count == 0:
        return run_fire_sales(system, variant="lower" if strict else "upper",
                              record_trajectory=record_trajectory,
                              tol=tol, max_rounds=max_rounds)
    adj = _out_adjacency(network, exposure)
    if mode == "simultaneous":
        defaulted, chi, rounds, traj = _combined_simultaneous(
            system, adj, record_trajectory, tol, max_rounds)
    else:
        defaulted, chi, rounds, traj = _combined_alternating(
            system, adj, strict, record_trajectory, tol, max_rounds)
    idx = np.flatnonzero(defaulted)
    return CascadeResult(defaulted=idx,
                         damage=float(system.importance[idx].sum()),
                         sold=chi, rounds=rounds,
                         trajectory=tuple(traj) if traj is not None else None)
