"""Log-space probability kernels for clustering count matrices.

All likelihood terms are Dirichlet-multinomial column marginals with a
symmetric Dirichlet(alpha) prior per position, integrated analytically.
Partition priors come in two flavours (Dirichlet process and uniform), both
expressed through sequential assignment weights so the same machinery drives
the Gibbs conditionals, the closed-form densities and prior simulation.
Everything returns natural-log values; normalization happens at call sites
by max-subtraction.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from .matrices import UNIFORM_BACKGROUND


class PriorKind(str, enum.Enum):
    DP = "dp"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class Hyperparameters:
    """Model hyperparameters.

    alpha   symmetric Dirichlet pseudocount per base
    b       new-cluster mass in the partition prior
    lam     expected core width (rate of the width prior)
    wmin    smallest width a core may take
    theta0  background base frequencies (A, C, G, T)
    prior_kind  partition prior flavour
    """

    alpha: float = 1.0
    b: float = 1.0
    lam: float = 8.0
    wmin: int = 6
    theta0: tuple[float, float, float, float] = UNIFORM_BACKGROUND
    prior_kind: PriorKind = PriorKind.DP

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.b > 0:
            raise ValueError("b must be positive")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.wmin < 1:
            raise ValueError("wmin must be >= 1")
        t = tuple(float(x) for x in self.theta0)
        if len(t) != 4 or any(x <= 0 for x in t):
            raise ValueError("theta0 must hold 4 positive frequencies")
        if abs(sum(t) - 1.0) > 1e-9:
            raise ValueError(f"theta0 must sum to 1, got {sum(t)}")
        object.__setattr__(self, "theta0", t)
        object.__setattr__(self, "prior_kind", PriorKind(self.prior_kind))

    @property
    def log_theta0(self) -> np.ndarray:
        return np.log(np.asarray(self.theta0))


@dataclass
class ClusterStats:
    """Sufficient statistics of one cluster: core width, summed core counts
    of the aligned members (width x 4), and the member count."""

    width: int
    core_counts: np.ndarray
    member_count: int

    def __post_init__(self):
        arr = np.asarray(self.core_counts, dtype=np.int64)
        if arr.shape != (self.width, 4):
            raise ValueError(
                f"core_counts shape {arr.shape} does not match width {self.width}"
            )
        if np.any(arr < 0) or self.member_count < 0:
            raise ValueError("cluster statistics must be non-negative")
        self.core_counts = arr


class GammaTables:
    """Cached log-gamma lookups for integer counts shifted by alpha.

    t1[x] = lgamma(x + alpha), t4[x] = lgamma(x + 4*alpha); both grow on
    demand.  log_const is the per-column constant lgamma(4a) - 4*lgamma(a).
    """

    def __init__(self, alpha: float, size: int = 4096):
        self.alpha = float(alpha)
        self.log_const = float(gammaln(4 * alpha) - 4 * gammaln(alpha))
        self._t1 = gammaln(np.arange(size, dtype=float) + self.alpha)
        self._t4 = gammaln(np.arange(size, dtype=float) + 4 * self.alpha)
        self._marginal_cache: dict[bytes, float] = {}

    def ensure(self, max_value: int) -> None:
        if max_value >= self._t1.shape[0]:
            size = 1 << int(max_value).bit_length()
            self._t1 = gammaln(np.arange(size, dtype=float) + self.alpha)
            self._t4 = gammaln(np.arange(size, dtype=float) + 4 * self.alpha)

    def log_dm_matrix(self, counts: np.ndarray) -> float:
        """Sum of per-column Dirichlet-multinomial log marginals for a
        (width, 4) integer table, including the per-column constant."""
        sums = counts.sum(axis=1)
        top = int(sums.max(initial=0))
        if top >= self._t4.shape[0]:
            self.ensure(top)
        return float(
            self._t1[counts].sum()
            - self._t4[sums].sum()
            + counts.shape[0] * self.log_const
        )

    def log_dm_matrix_cached(self, counts: np.ndarray) -> float:
        key = counts.tobytes()
        hit = self._marginal_cache.get(key)
        if hit is not None:
            return hit
        value = self.log_dm_matrix(counts)
        if len(self._marginal_cache) > 1_000_000:
            self._marginal_cache.clear()
        self._marginal_cache[key] = value
        return value


@lru_cache(maxsize=32)
def tables_for(alpha: float) -> GammaTables:
    return GammaTables(alpha)


def log_dm_column(counts: Sequence[int], alpha: float) -> float:
    """Log marginal of a single count column under Dirichlet(alpha) per base.

    No multinomial coefficient: sites are treated as labelled.  All-zero
    columns give exactly 0.
    """
    arr = np.asarray(counts, dtype=np.int64)
    if arr.shape != (4,):
        raise ValueError("counts must hold 4 values")
    if np.any(arr < 0):
        raise ValueError("counts must be non-negative")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return tables_for(float(alpha)).log_dm_matrix(arr[None, :])


def log_marginal_cluster(stats: ClusterStats, alpha: float) -> float:
    """Log marginal likelihood of a cluster's summed core counts: the product
    of independent column marginals."""
    return tables_for(float(alpha)).log_dm_matrix(stats.core_counts)


def _core_array(core) -> np.ndarray:
    arr = np.asarray(core, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"core must be a (width, 4) table, got shape {arr.shape}")
    return arr


def log_pred_new(core, hyper: Hyperparameters) -> float:
    """Likelihood factor for opening a new cluster on this core (the prior
    mass b is applied separately by the caller)."""
    return tables_for(hyper.alpha).log_dm_matrix(_core_array(core))


def log_pred_join(core, stats: ClusterStats, hyper: Hyperparameters) -> float:
    """Likelihood factor for merging a core into an existing cluster.

    Telescopes: log marginal of merged counts minus log marginal of the
    cluster's current counts.  Joining an empty cluster reduces to
    log_pred_new.
    """
    arr = _core_array(core)
    if arr.shape[0] != stats.width:
        raise ValueError(
            f"core width {arr.shape[0]} does not match cluster width {stats.width}"
        )
    t = tables_for(hyper.alpha)
    return t.log_dm_matrix(arr + stats.core_counts) - t.log_dm_matrix(stats.core_counts)


def seq_prior_weights(
    cluster_sizes: Sequence[int], hyper: Hyperparameters
) -> tuple[float, np.ndarray]:
    """Unnormalized sequential assignment weights (new-cluster weight, one
    weight per existing cluster) for the next observation."""
    sizes = np.asarray(cluster_sizes, dtype=float)
    if np.any(sizes <= 0):
        raise ValueError("cluster sizes must be positive")
    if hyper.prior_kind is PriorKind.DP:
        return hyper.b, sizes
    return hyper.b, np.ones_like(sizes)


def log_partition_prior(z: Sequence[int], hyper: Hyperparameters) -> float:
    """Log prior density of the partition encoded by label vector z.

    DP: closed form b^C * prod (n_c - 1)! / prod_{i=1..n} (b + i - 1), which
    equals the sequential construction probability for every arrival order.
    Uniform: the sequential construction composed along observation order
    (labels by first appearance) - the normalized density the simulator
    draws from; for partitions whose clusters are contiguous blocks in
    decreasing size order it coincides with the closed form
    b^(C-1) (b + C) / prod_c (b + c)^{n_c}.
    """
    labels = list(z)
    n = len(labels)
    if n == 0:
        raise ValueError("partition must cover at least one observation")
    b = hyper.b
    if hyper.prior_kind is PriorKind.DP:
        sizes: dict[int, int] = {}
        for lab in labels:
            sizes[lab] = sizes.get(lab, 0) + 1
        lp = len(sizes) * math.log(b)
        lp += sum(math.lgamma(nc) for nc in sizes.values())
        lp -= sum(math.log(b + i) for i in range(n))
        return lp
    seen: dict[int, int] = {}
    lp = 0.0
    for lab in labels:
        c = len(seen)
        if lab in seen:
            lp -= math.log(b + c)
            seen[lab] += 1
        else:
            lp += math.log(b) - math.log(b + c)
            seen[lab] = 1
    return lp


def log_width_prior(
    w: int, hyper: Hyperparameters, support: Iterable[int] | None = None
) -> float:
    """Log prior weight of core width w: w*log(lam) - lam - lgamma(w).

    With a finite support supplied, the value is renormalized over exactly
    those widths (the truncated prior the sampler draws new widths from).
    """
    if w < hyper.wmin:
        raise ValueError(f"width {w} below minimum width {hyper.wmin}")
    raw = w * math.log(hyper.lam) - hyper.lam - math.lgamma(w)
    if support is None:
        return raw
    ws = sorted(set(int(v) for v in support))
    if not ws or any(v < hyper.wmin for v in ws):
        raise ValueError("support must be non-empty and respect wmin")
    if w not in ws:
        raise ValueError(f"width {w} not in support {ws}")
    terms = np.array([v * math.log(hyper.lam) - hyper.lam - math.lgamma(v) for v in ws])
    top = terms.max()
    return raw - (top + math.log(np.exp(terms - top).sum()))


def log_background(bg_counts: Sequence[int], hyper: Hyperparameters) -> float:
    """Log probability of the non-core columns: sum_k B_k * log theta0_k."""
    arr = np.asarray(bg_counts, dtype=np.int64)
    if arr.shape != (4,):
        raise ValueError("background counts must hold 4 per-base totals")
    if np.any(arr < 0):
        raise ValueError("background counts must be non-negative")
    return float(arr @ hyper.log_theta0)


def cluster_strength(
    member_cores: Sequence[np.ndarray], stats: ClusterStats, hyper: Hyperparameters
) -> float:
    """Log Bayes factor of the cluster against splitting it into singletons.

    log[ marginal(merged) / prod_i marginal(member_i) * (m-1)! / b^(m-1) ].
    Single-member clusters score exactly 0.
    """
    m = len(member_cores)
    if m != stats.member_count:
        raise ValueError("member_cores length must equal stats.member_count")
    if m <= 1:
        return 0.0
    t = tables_for(hyper.alpha)
    lp = t.log_dm_matrix(stats.core_counts)
    for core in member_cores:
        arr = _core_array(core)
        if arr.shape[0] != stats.width:
            raise ValueError("member core width does not match cluster width")
        lp -= t.log_dm_matrix(arr)
    return lp + math.lgamma(m) - (m - 1) * math.log(hyper.b)


def log_joint(state, data, hyper: Hyperparameters) -> float:
    """Joint log density of a sampler state, recomputed from raw matrices.

    Sum of per-cluster core marginals, the background term over all non-core
    columns, the partition prior, and per-cluster width priors renormalized
    over the currently feasible width support.  This is the from-scratch
    reference the sampler's incremental bookkeeping is audited against.
    """
    z = np.asarray(state.z)
    offsets = np.asarray(state.offsets)
    widths = {cid: cl.stats.width for cid, cl in state.clusters.items()}
    raw = [rec.matrix.counts for rec in data]
    return log_joint_from_arrays(z, offsets, widths, raw, hyper)


def log_joint_from_arrays(
    z: np.ndarray,
    offsets: np.ndarray,
    widths: dict[int, int],
    raw_counts: Sequence[np.ndarray],
    hyper: Hyperparameters,
) -> float:
    t = tables_for(hyper.alpha)
    lp = log_partition_prior(z, hyper)
    bg = np.zeros(4, dtype=np.int64)
    members: dict[int, list[int]] = {}
    for i, lab in enumerate(z):
        members.setdefault(int(lab), []).append(i)
    for cid, idx in sorted(members.items()):
        w = widths[cid]
        core_sum = np.zeros((w, 4), dtype=np.int64)
        max_w = None
        for i in idx:
            mat = raw_counts[i]
            o = int(offsets[i])
            if o < 0 or o + w > mat.shape[0]:
                raise ValueError(
                    f"motif {i}: core [{o}, {o + w}) outside matrix of width {mat.shape[0]}"
                )
            core_sum += mat[o : o + w]
            bg += mat.sum(axis=0) - mat[o : o + w].sum(axis=0)
            room = mat.shape[0] - o
            max_w = room if max_w is None else min(max_w, room)
        lp += t.log_dm_matrix(core_sum)
        lp += log_width_prior(w, hyper, support=range(hyper.wmin, max_w + 1))
    lp += log_background(bg, hyper)
    return lp
