"""Random exposure networks: sampling, monetary marks, degree estimation.

The sampler realizes, per ordered pair (i, j), the stacked edge
probabilities

    p^r_{i,j} = min(1/R, w_i^{+,r,a_j} w_j^{-,r,a_i} / n),   r = 1..R,

with a single uniform per pair: multiplicity r is drawn iff the uniform
falls into the r-th stacked subinterval, so multiplicities are mutually
exclusive and the total pair probability never exceeds 1.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .rng import pair_uniforms, substream
from .systems import FinancialSystem

__all__ = [
    "ExposureNetwork", "ExposureListSpec", "sample_network",
    "attach_exposure_marks", "sample_exposures", "estimate_weights",
    "save_network", "load_network",
]


@dataclass(frozen=True)
class ExposureNetwork:
    """Sparse directed multigraph with exclusive multiplicities.

    ``src``/``dst`` hold one entry per realized edge, ``mult`` its
    multiplicity in 1..R, and ``marks`` the optional monetary exposure.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    mult: np.ndarray
    marks: np.ndarray | None = None

    def __post_init__(self):
        src = np.asarray(self.src, dtype=np.int64)
        dst = np.asarray(self.dst, dtype=np.int64)
        mult = np.asarray(self.mult, dtype=np.int64)
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        object.__setattr__(self, "mult", mult)
        if not (src.shape == dst.shape == mult.shape):
            raise ValueError("edge arrays must have equal length")
        if src.size:
            if np.any(src == dst):
                raise ValueError("self-loops are not allowed")
            if np.any((src < 0) | (src >= self.n) | (dst < 0) | (dst >= self.n)):
                raise ValueError("edge endpoints out of range")
            if np.any(mult < 1):
                raise ValueError("multiplicities start at 1")
            pair_ids = src * np.int64(self.n) + dst
            if np.unique(pair_ids).size != pair_ids.size:
                raise ValueError("at most one edge per ordered pair")
        if self.marks is not None:
            marks = np.asarray(self.marks, dtype=float)
            if marks.shape != src.shape:
                raise ValueError("marks must align with edges")
            object.__setattr__(self, "marks", marks)

    @property
    def edge_count(self) -> int:
        return int(self.src.size)

    def in_degrees(self, weighted: bool = False) -> np.ndarray:
        w = self.mult if weighted else None
        return np.bincount(self.dst, weights=w, minlength=self.n).astype(
            float if weighted else np.int64)

    def out_degrees(self, weighted: bool = False) -> np.ndarray:
        w = self.mult if weighted else None
        return np.bincount(self.src, weights=w, minlength=self.n).astype(
            float if weighted else np.int64)


@dataclass(frozen=True)
class ExposureListSpec:
    """Exchangeable i.i.d. monetary exposure lists.

    kind 'pareto': density exponent ``xi`` with scale ``e_min``;
    kind 'const': every exposure equals ``e_min``.
    """

    kind: str = "pareto"
    xi: float = 2.5277
    e_min: float = 1.0

    def __post_init__(self):
        if self.kind not in ("pareto", "const"):
            raise ValueError("exposure kind must be 'pareto' or 'const'")
        if self.e_min <= 0:
            raise ValueError("exposures must be strictly positive")
        if self.kind == "pareto" and self.xi <= 1.0:
            raise ValueError("pareto exponent must exceed 1")

    def quantile(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.kind == "const":
            return np.full_like(u, self.e_min)
        return self.e_min * np.power(1.0 - u, -1.0 / (self.xi - 1.0))

    def mean(self) -> float:
        if self.kind == "const":
            return self.e_min
        if self.xi <= 2.0:
            return math.inf
        return self.e_min * (self.xi - 1.0) / (self.xi - 2.0)


def sample_exposures(spec: ExposureListSpec, rng: np.random.Generator,
                     size: int) -> np.ndarray:
    return spec.quantile(rng.random(size))


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _pair_probs(system: FinancialSystem, i: int, targets: np.ndarray) -> np.ndarray:
    """Stacked probabilities (len(targets), R) for source i."""
    n = system.n
    r = system.in_weights.shape[1]
    ti = int(system.inst_type[i])
    tj = system.inst_type[targets]
    out_sel = system.out_weights[i][:, tj].T          # (m, R)
    in_sel = system.in_weights[targets, :, ti]        # (m, R)
    return np.minimum(out_sel * in_sel / n, 1.0 / r)


def _collect(out_lists, i, targets, mult):
    if targets.size:
        out_lists[0].append(np.full(targets.size, i, dtype=np.int64))
        out_lists[1].append(targets.astype(np.int64))
        out_lists[2].append(mult.astype(np.int64))


def _sample_naive(system: FinancialSystem, seed: int) -> ExposureNetwork:
    n = system.n
    lists = ([], [], [])
    all_j = np.arange(n)
    for i in range(n):
        probs = _pair_probs(system, i, all_j)
        probs[i, :] = 0.0
        cum = np.cumsum(probs, axis=1)
        u = pair_uniforms(seed, i, all_j, n)
        hit = u < cum[:, -1]
        if np.any(hit):
            mult = 1 + np.sum(u[hit, None] >= cum[hit, :-1], axis=1)
            _collect(lists, i, all_j[hit], mult)
    return _finish(lists, n)


def _pair_probs_flat(system: FinancialSystem, srcs: np.ndarray,
                     tgts: np.ndarray) -> np.ndarray:
    """Stacked probabilities (len, R) for arbitrary pair arrays."""
    n = system.n
    r = system.in_weights.shape[1]
    tj = system.inst_type[tgts]
    ti = system.inst_type[srcs]
    out_sel = system.out_weights[srcs, :, tj]
    in_sel = system.in_weights[tgts, :, ti]
    return np.minimum(out_sel * in_sel / n, 1.0 / r)


def _ragged_prefix(counts: np.ndarray):
    """(sources repeated, rank within source) for per-source prefix sizes."""
    tot = int(counts.sum())
    srcs = np.repeat(np.arange(counts.size), counts)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    ranks = np.arange(tot) - starts[srcs]
    return srcs, ranks


def _distinct_positions(gen: np.random.Generator, widths: np.ndarray,
                        counts: np.ndarray):
    """k_i distinct uniform positions in [0, width_i) per row, vectorized.

    Conditioned on its count, a constant-probability Bernoulli scan hits a
    uniformly random subset, so sampling (count, subset) is equivalent to
    the per-position sweep.  Counts of 1 and 2 (the bulk) are drawn in
    vector form; larger counts fall back to Floyd's algorithm.
    """
    rows = []
    poss = []
    one = counts == 1
    if np.any(one):
        rows.append(np.flatnonzero(one))
        poss.append(gen.integers(0, widths[one]))
    two = counts == 2
    if np.any(two):
        idx = np.flatnonzero(two)
        a = gen.integers(0, widths[two])
        b = gen.integers(0, widths[two] - 1)
        b = b + (b >= a)
        rows.append(np.concatenate([idx, idx]))
        poss.append(np.concatenate([a, b]))
    for row in np.flatnonzero(counts >= 3):
        w, k = int(widths[row]), int(counts[row])
        chosen: set = set()
        for t in range(w - k, w):
            r = int(gen.integers(0, t + 1))
            chosen.add(r if r not in chosen else t)
        rows.append(np.full(k, row))
        poss.append(np.fromiter(chosen, dtype=np.int64, count=k))
    if not rows:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.concatenate(rows), np.concatenate(poss)


def _sample_skipping(system: FinancialSystem, seed: int) -> ExposureNetwork:
    """Banded scan over targets sorted by in-weight; distribution-identical
    to the pairwise loop.

    Pairs whose probability bound exceeds 1/4 (heavy prefixes of the sorted
    target list) are enumerated with the counter-based pair uniforms.  The
    rest is covered by weight-halving bands: within a band the bound is
    constant per source, so the number of landings is Binomial and their
    positions are uniform; landings are then thinned to the exact stacked
    probabilities.  Expected work is O(edges + n log weight-range).
    """
    n = system.n
    nrel = system.in_weights.shape[1]
    in_max = system.in_weights.max(axis=(1, 2))
    order = np.argsort(-in_max, kind="stable")
    in_max_sorted = in_max[order]
    out_max = system.out_weights.max(axis=(1, 2))
    lists = ([], [], [])

    # heavy prefixes: rank k_i = #targets with R*out_max_i*in_max/n > 1/4
    with np.errstate(divide="ignore"):
        theta = np.where(out_max > 0, 0.25 * n / (nrel * out_max), np.inf)
    k_arr = np.searchsorted(-in_max_sorted, -theta, side="left")
    srcs_h, ranks_h = _ragged_prefix(k_arr)
    if srcs_h.size:
        tgts_h = order[ranks_h]
        keep = tgts_h != srcs_h
        srcs_h, tgts_h = srcs_h[keep], tgts_h[keep]
        u = pair_uniforms(seed, srcs_h, tgts_h, n)
        probs = _pair_probs_flat(system, srcs_h, tgts_h)
        cum = np.cumsum(probs, axis=1)
        hit = u < cum[:, -1]
        if np.any(hit):
            mult = 1 + np.sum(u[hit, None] >= cum[hit, :-1], axis=1)
            lists[0].append(srcs_h[hit])
            lists[1].append(tgts_h[hit])
            lists[2].append(mult.astype(np.int64))

    # light bands: halving levels of the sorted in-weight profile
    pos_max = in_max_sorted[0] if n else 0.0
    gen = substream(seed, "edges")
    level = pos_max
    lo_rank = 0
    while level > 0.0 and lo_rank < n:
        hi_rank = int(np.searchsorted(-in_max_sorted, -level / 2.0, side="left"))
        hi_rank = max(hi_rank, lo_rank + 1)
        # per-source effective start: max(lo_rank, k_i), clipped to the band
        start = np.clip(k_arr, lo_rank, hi_rank)
        width = hi_rank - start
        top_in = in_max_sorted[np.minimum(start, n - 1)]
        env = np.minimum(0.25, nrel * out_max * top_in / n)
        env[width <= 0] = 0.0
        counts = gen.binomial(np.maximum(width, 0), env)
        rows, offs = _distinct_positions(gen, width, counts)
        if rows.size:
            ranks = start[rows] + offs
            tgts = order[ranks]
            vs = gen.random(rows.size) * env[rows]
            keep = tgts != rows
            rows, tgts, vs = rows[keep], tgts[keep], vs[keep]
            probs = _pair_probs_flat(system, rows, tgts)
            cum = np.cumsum(probs, axis=1)
            hit = vs < cum[:, -1]
            if np.any(hit):
                mult = 1 + np.sum(vs[hit, None] >= cum[hit, :-1], axis=1)
                lists[0].append(rows[hit])
                lists[1].append(tgts[hit])
                lists[2].append(mult.astype(np.int64))
        lo_rank = hi_rank
        level = in_max_sorted[lo_rank] if lo_rank < n else 0.0
    return _finish(lists, n)


def _finish(lists, n) -> ExposureNetwork:
    if lists[0]:
        src = np.concatenate(lists[0])
        dst = np.concatenate(lists[1])
        mult = np.concatenate(lists[2])
        order = np.lexsort((dst, src))
        src, dst, mult = src[order], dst[order], mult[order]
    else:
        src = dst = mult = np.empty(0, dtype=np.int64)
    return ExposureNetwork(n=n, src=src, dst=dst, mult=mult)


def sample_network(system: FinancialSystem, seed: int,
                   method: str = "auto") -> ExposureNetwork:
    """One network draw; ``method`` in {'auto', 'pairwise', 'skipping'}."""
    if method == "auto":
        method = "pairwise" if system.n <= 512 else "skipping"
    if method == "pairwise":
        return _sample_naive(system, seed)
    if method == "skipping":
        return _sample_skipping(system, seed)
    raise ValueError("method must be 'auto', 'pairwise' or 'skipping'")


# ---------------------------------------------------------------------------
# monetary marks
# ---------------------------------------------------------------------------

def attach_exposure_marks(network: ExposureNetwork, spec: ExposureListSpec,
                          seed: int) -> ExposureNetwork:
    """Each multiplicity-r edge gets the sum of r i.i.d. exposure draws.

    Draws are keyed by (seed, source, target, slot) so a given edge always
    sees the same exposures regardless of evaluation order.
    """
    marks = np.zeros(network.edge_count)
    top = int(network.mult.max()) if network.edge_count else 0
    # slots from 1: slot 0 belongs to the edge-presence decision
    for s in range(top):
        live = network.mult > s
        u = pair_uniforms(seed, network.src[live], network.dst[live],
                          network.n, slot=s + 1)
        marks[live] += spec.quantile(u)
    return replace(network, marks=marks)


# ---------------------------------------------------------------------------
# weight estimation from observed degrees
# ---------------------------------------------------------------------------

def estimate_weights(in_degrees, out_degrees):
    """Approximate degree-proportional weight estimators.

    w_hat_i^+- = d_i^+- * sqrt(n / sum_j d_j^-); valid when weight products
    are small against n (the dense regime has no closed form).
    """
    din = np.asarray(in_degrees, dtype=float)
    dout = np.asarray(out_degrees, dtype=float)
    if din.shape != dout.shape or din.ndim != 1:
        raise ValueError("degree vectors must be 1-d and equally long")
    if np.any(din < 0) or np.any(dout < 0):
        raise ValueError("degrees must be nonnegative")
    total = din.sum()
    if total != dout.sum():
        raise ValueError("in/out degree sums differ; the graph is not closed")
    if total <= 0:
        raise ValueError("need a positive total degree")
    scale = math.sqrt(din.size / total)
    return din * scale, dout * scale


# ---------------------------------------------------------------------------
# edge-list persistence
# ---------------------------------------------------------------------------

def save_network(network: ExposureNetwork, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", network.n])
        w.writerow(["from", "to", "r", "mark"])
        marks = network.marks
        for e in range(network.edge_count):
            row = [int(network.src[e]), int(network.dst[e]), int(network.mult[e]),
                   "" if marks is None else "%.17g" % marks[e]]
            w.writerow(row)


def load_network(path) -> ExposureNetwork:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or rows[0][0] != "n":
        raise ValueError("not an edge-list dump")
    n = int(rows[0][1])
    body = rows[2:]
    src = np.array([int(r[0]) for r in body], dtype=np.int64)
    dst = np.array([int(r[1]) for r in body], dtype=np.int64)
    mult = np.array([int(r[2]) for r in body], dtype=np.int64)
    has_marks = any(len(r) > 3 and r[3] != "" for r in body)
    marks = (np.array([float(r[3]) for r in body]) if has_marks else None)
    return ExposureNetwork(n=n, src=src, dst=dst, mult=mult, marks=marks)
