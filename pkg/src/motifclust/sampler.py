"""Collapsed Gibbs sampler over cluster assignments, alignments and widths.

State holds, per cluster, the summed core counts of its aligned members;
cluster parameters are integrated out, so moves only ever touch these
sufficient statistics plus the pooled background counts.  Each iteration
sweeps assignments in motif-index order, then (on the align_every schedule)
core offsets, then per-cluster widths.  All randomness flows through one
numpy Generator, making runs bit-reproducible from the seed.

Offsets are 0-based column indices into the raw matrix; a core of width w
at offset a covers columns [a, a + w).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .kernels import (
    ClusterStats,
    GammaTables,
    Hyperparameters,
    PriorKind,
    log_joint_from_arrays,
    tables_for,
)
from .matrices import MotifRecord

INIT_MODES = ("singletons", "single", "random")


@dataclass(frozen=True)
class RunConfig:
    """Sampler run settings.

    burn_in defaults to 20% of iterations.  align_every=None disables the
    alignment sweep.  audit_every (in state updates) rebuilds the sufficient
    statistics from scratch and fails loudly on any mismatch.
    """

    iterations: int
    burn_in: int | None = None
    align_every: int | None = 10
    thin: int = 1
    seed: int = 0
    record_trace: bool = True
    audit_every: int | None = None
    init_mode: str = "singletons"

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.iterations // 5)
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.iterations and self.burn_in >= self.iterations:
            raise ValueError("burn_in must be smaller than iterations")
        if self.align_every is not None and self.align_every < 1:
            raise ValueError("align_every must be >= 1 (or None to disable)")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.audit_every is not None and self.audit_every < 1:
            raise ValueError("audit_every must be >= 1")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}")


@dataclass(frozen=True)
class Snapshot:
    """One recorded state: canonical labels (first appearance order),
    0-based offsets, and per-canonical-cluster widths."""

    iteration: int
    log_joint: float
    z: np.ndarray
    offsets: np.ndarray
    widths: np.ndarray

    def n_clusters(self) -> int:
        return int(self.widths.shape[0])


@dataclass
class RunTrace:
    """Everything a run leaves behind: per-iteration series, thinned
    post-burn-in snapshots, and the highest-density snapshot seen."""

    ids: list[str]
    config: RunConfig
    hyper: Hyperparameters
    initial: Snapshot
    log_joint_series: np.ndarray
    n_clusters_series: np.ndarray
    snapshots: list[Snapshot]
    best: Snapshot


class _Cluster:
    __slots__ = ("stats", "members", "logm")

    def __init__(self, stats: ClusterStats, members: set[int], logm: float):
        self.stats = stats
        self.members = members
        self.logm = logm


class SamplerState:
    """Mutable sampler state bound to its data and hyperparameters."""

    __slots__ = (
        "data",
        "hyper",
        "tables",
        "ids",
        "raw",
        "lengths",
        "totals",
        "base_prefix",
        "bg_prefix",
        "z",
        "offsets",
        "clusters",
        "background",
        "iteration",
        "updates",
        "_next_id",
        "_width_draw_cache",
    )

    def __init__(self, data: Sequence[MotifRecord], hyper: Hyperparameters):
        if not data:
            raise ValueError("need at least one motif")
        self.data = list(data)
        self.hyper = hyper
        self.tables: GammaTables = tables_for(hyper.alpha)
        self.ids = [rec.id for rec in self.data]
        self.raw = [rec.matrix.counts for rec in self.data]
        self.lengths = np.array([r.shape[0] for r in self.raw], dtype=np.int64)
        short = [rec.id for rec in self.data if rec.width < hyper.wmin]
        if short:
            raise ValueError(
                f"motifs narrower than wmin={hyper.wmin}: {short}; filter first"
            )
        self.tables.ensure(int(sum(int(r.sum()) for r in self.raw)) + 4)
        self.totals = np.stack([r.sum(axis=0) for r in self.raw])
        log_theta0 = hyper.log_theta0
        # per-motif prefix sums: base_prefix[i][j] = column sums over [0, j)
        self.base_prefix = [
            np.vstack([np.zeros(4, dtype=np.int64), np.cumsum(r, axis=0)])
            for r in self.raw
        ]
        # bg_prefix[i][j] = sum over columns < j of counts . log(theta0)
        self.bg_prefix = [
            np.concatenate([[0.0], np.cumsum(r @ log_theta0)]) for r in self.raw
        ]
        n = len(self.data)
        self.z = np.zeros(n, dtype=np.int64)
        self.offsets = np.zeros(n, dtype=np.int64)
        self.clusters: dict[int, _Cluster] = {}
        self.background = np.zeros(4, dtype=np.int64)
        self.iteration = 0
        self.updates = 0
        self._next_id = 0
        self._width_draw_cache: dict[int, np.ndarray] = {}

    # ------------------------------------------------------------ bookkeeping

    def n_motifs(self) -> int:
        return len(self.data)

    def core(self, i: int, offset: int, width: int) -> np.ndarray:
        return self.raw[i][offset : offset + width]

    def core_base_sums(self, i: int, offset: int, width: int) -> np.ndarray:
        p = self.base_prefix[i]
        return p[offset + width] - p[offset]

    def core_bg_dot(self, i: int, offset: int, width: int) -> float:
        p = self.bg_prefix[i]
        return p[offset + width] - p[offset]

    def _new_cluster(self, width: int, counts: np.ndarray, members: set[int]) -> int:
        cid = self._next_id
        self._next_id += 1
        stats = ClusterStats(width=width, core_counts=counts, member_count=len(members))
        self.clusters[cid] = _Cluster(stats, members, self.tables.log_dm_matrix(counts))
        return cid

    def _refresh(self, cl: _Cluster) -> None:
        cl.logm = self.tables.log_dm_matrix_cached(cl.stats.core_counts)

    def attach(self, i: int, cid: int) -> None:
        """Add motif i's core (at its current offset) to cluster cid."""
        cl = self.clusters[cid]
        w = cl.stats.width
        o = int(self.offsets[i])
        cl.stats.core_counts += self.core(i, o, w)
        cl.stats.member_count += 1
        cl.members.add(i)
        self._refresh(cl)
        self.z[i] = cid
        self.background += self.totals[i] - self.core_base_sums(i, o, w)

    def detach(self, i: int) -> tuple[int, int]:
        """Remove motif i from its cluster; returns (old cluster id, old width).
        Emptied clusters are retired, their ids never reused."""
        cid = int(self.z[i])
        cl = self.clusters[cid]
        w = cl.stats.width
        o = int(self.offsets[i])
        cl.stats.core_counts -= self.core(i, o, w)
        cl.stats.member_count -= 1
        cl.members.discard(i)
        if cl.stats.member_count == 0:
            del self.clusters[cid]
        else:
            self._refresh(cl)
        self.background -= self.totals[i] - self.core_base_sums(i, o, w)
        return cid, w

    def cluster_width_support(self, cid: int) -> range:
        cl = self.clusters[cid]
        top = min(
            int(self.lengths[m]) - int(self.offsets[m]) for m in cl.members
        )
        return range(self.hyper.wmin, top + 1)

    def audit(self) -> None:
        """Rebuild all sufficient statistics from scratch; exact match required."""
        bg = np.zeros(4, dtype=np.int64)
        seen: set[int] = set()
        for i in range(self.n_motifs()):
            cid = int(self.z[i])
            if cid not in self.clusters:
                raise AssertionError(f"motif {i} assigned to unknown cluster {cid}")
            seen.add(cid)
        if seen != set(self.clusters):
            raise AssertionError("clusters without members present")
        for cid, cl in self.clusters.items():
            members = {i for i in range(self.n_motifs()) if int(self.z[i]) == cid}
            if members != cl.members:
                raise AssertionError(f"cluster {cid} member set out of sync")
            if cl.stats.member_count != len(members):
                raise AssertionError(f"cluster {cid} member count out of sync")
            w = cl.stats.width
            rebuilt = np.zeros((w, 4), dtype=np.int64)
            for i in members:
                o = int(self.offsets[i])
                if o < 0 or o + w > int(self.lengths[i]):
                    raise AssertionError(f"motif {i} core outside matrix bounds")
                rebuilt += self.core(i, o, w)
            if not np.array_equal(rebuilt, cl.stats.core_counts):
                raise AssertionError(f"cluster {cid} core counts out of sync")
            if cl.logm != self.tables.log_dm_matrix(rebuilt):
                raise AssertionError(f"cluster {cid} cached marginal out of sync")
            bg += sum(self.totals[i] for i in members)
            bg -= rebuilt.sum(axis=0)
        if not np.array_equal(bg, self.background):
            raise AssertionError("background counts out of sync")

    # ------------------------------------------------------------- densities

    def log_partition_prior(self) -> float:
        b = self.hyper.b
        if self.hyper.prior_kind is PriorKind.DP:
            lp = len(self.clusters) * math.log(b)
            for cl in self.clusters.values():
                lp += math.lgamma(cl.stats.member_count)
            lp -= sum(math.log(b + i) for i in range(self.n_motifs()))
            return lp
        seen: set[int] = set()
        lp = 0.0
        c = 0
        for lab in self.z:
            lab = int(lab)
            if lab in seen:
                lp -= math.log(b + c)
            else:
                lp += math.log(b) - math.log(b + c)
                seen.add(lab)
                c += 1
        return lp

    def log_joint_fast(self) -> float:
        """Joint log density from the incrementally-maintained statistics."""
        hyper = self.hyper
        lp = self.log_partition_prior()
        lp += float(self.background @ hyper.log_theta0)
        lam, wmin = hyper.lam, hyper.wmin
        for cid in sorted(self.clusters):
            cl = self.clusters[cid]
            lp += cl.logm
            top = min(int(self.lengths[m]) - int(self.offsets[m]) for m in cl.members)
            w = cl.stats.width
            if top > wmin:
                raw_w = w * math.log(lam) - lam - math.lgamma(w)
                terms = np.array(
                    [v * math.log(lam) - lam - math.lgamma(v) for v in range(wmin, top + 1)]
                )
                m = terms.max()
                lp += raw_w - (m + math.log(np.exp(terms - m).sum()))
            # single feasible width carries no weight after renormalization
        return lp

    def snapshot(self, iteration: int, log_joint: float) -> Snapshot:
        relabel: dict[int, int] = {}
        z = np.empty_like(self.z)
        for i, lab in enumerate(self.z):
            lab = int(lab)
            if lab not in relabel:
                relabel[lab] = len(relabel)
            z[i] = relabel[lab]
        widths = np.zeros(len(relabel), dtype=np.int64)
        for old, new in relabel.items():
            widths[new] = self.clusters[old].stats.width
        return Snapshot(
            iteration=iteration,
            log_joint=log_joint,
            z=z,
            offsets=self.offsets.copy(),
            widths=widths,
        )


# ------------------------------------------------------------------ init


def init_state(
    data: Sequence[MotifRecord],
    hyper: Hyperparameters,
    rng: np.random.Generator,
    init_mode: str = "singletons",
) -> SamplerState:
    """Build a feasible starting state.

    Initial widths are lam rounded, clamped into [wmin, narrowest feasible];
    offsets are uniform over the feasible range for the chosen width.
    """
    if init_mode not in INIT_MODES:
        raise ValueError(f"init_mode must be one of {INIT_MODES}")
    state = SamplerState(data, hyper)
    n = state.n_motifs()
    target_w = max(hyper.wmin, int(round(hyper.lam)))

    if init_mode == "singletons":
        groups = [[i] for i in range(n)]
    elif init_mode == "single":
        groups = [list(range(n))]
    else:
        from .priorsim import simulate_partition

        labels = simulate_partition(n, hyper, rng)
        groups = [
            [i for i in range(n) if labels[i] == lab]
            for lab in range(int(labels.max()) + 1)
        ]

    for group in groups:
        w = min(target_w, min(int(state.lengths[i]) for i in group))
        counts = np.zeros((w, 4), dtype=np.int64)
        for i in group:
            o = int(rng.integers(0, int(state.lengths[i]) - w + 1))
            state.offsets[i] = o
            counts += state.core(i, o, w)
        cid = state._new_cluster(w, counts, set(group))
        for i in group:
            state.z[i] = cid
            state.background += state.totals[i] - state.core_base_sums(
                i, int(state.offsets[i]), w
            )
    return state


# ------------------------------------------------------------------ moves


def _categorical(logw: np.ndarray, rng: np.random.Generator) -> int:
    w = np.exp(logw - logw.max())
    cum = np.cumsum(w)
    return int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))


def _truncated_width_probs(state: SamplerState, max_width: int) -> np.ndarray:
    """Cumulative probabilities of the width prior truncated to
    [wmin, max_width], cached per max_width."""
    cached = state._width_draw_cache.get(max_width)
    if cached is not None:
        return cached
    hyper = state.hyper
    ws = np.arange(hyper.wmin, max_width + 1, dtype=float)
    logp = ws * math.log(hyper.lam) - hyper.lam - np.array([math.lgamma(v) for v in ws])
    p = np.exp(logp - logp.max())
    cum = np.cumsum(p)
    cum /= cum[-1]
    state._width_draw_cache[max_width] = cum
    return cum


def _assignment_weights(
    state: SamplerState, i: int, prev_width: int
) -> tuple[list[int], np.ndarray]:
    """Candidate clusters (offset-feasible at motif i's current offset) and
    their unnormalized log weights; the final entry is the new-cluster option
    scored on the motif's current core extent."""
    hyper = state.hyper
    tables = state.tables
    o = int(state.offsets[i])
    length = int(state.lengths[i])
    dp = hyper.prior_kind is PriorKind.DP
    cids: list[int] = []
    logws: list[float] = []
    for cid in sorted(state.clusters):
        cl = state.clusters[cid]
        w = cl.stats.width
        if o + w > length:
            continue
        core = state.raw[i][o : o + w]
        join = tables.log_dm_matrix_cached(core + cl.stats.core_counts) - cl.logm
        prior = math.log(cl.stats.member_count) if dp else 0.0
        cids.append(cid)
        logws.append(prior + join - state.core_bg_dot(i, o, w))
    core_prev = state.raw[i][o : o + prev_width]
    new_w = (
        math.log(hyper.b)
        + tables.log_dm_matrix_cached(core_prev)
        - state.core_bg_dot(i, o, prev_width)
    )
    logws.append(new_w)
    return cids, np.array(logws)


def resample_assignment(state: SamplerState, i: int, rng: np.random.Generator) -> None:
    """Gibbs update of motif i's cluster assignment.

    Weights are sequential prior mass times the predictive likelihood of the
    motif's core under each candidate width, plus the background term for
    columns the candidate core leaves uncovered.  Clusters whose width does
    not fit at the motif's current offset get probability zero.  A chosen
    new cluster draws its width from the truncated width prior and clamps
    the offset to keep the core inside the matrix.
    """
    _, prev_width = state.detach(i)
    cids, logws = _assignment_weights(state, i, prev_width)
    choice = _categorical(logws, rng)
    if choice < len(cids):
        state.attach(i, cids[choice])
    else:
        length = int(state.lengths[i])
        cum = _truncated_width_probs(state, length)
        w_new = state.hyper.wmin + int(
            np.searchsorted(cum, rng.random(), side="right")
        )
        o = min(int(state.offsets[i]), length - w_new)
        state.offsets[i] = o
        counts = state.core(i, o, w_new).copy()
        cid = state._new_cluster(w_new, counts, {i})
        state.z[i] = cid
        state.background += state.totals[i] - state.core_base_sums(i, o, w_new)
    state.updates += 1


def resample_alignment(state: SamplerState, i: int, rng: np.random.Generator) -> None:
    """Gibbs update of motif i's core offset within its cluster.

    The motif's own core is held out of the cluster statistics; each
    feasible offset is scored by the join predictive against the remaining
    members (for singletons this is the fresh-cluster marginal) plus the
    background term for the columns it displaces.
    """
    cid = int(state.z[i])
    cl = state.clusters[cid]
    w = cl.stats.width
    length = int(state.lengths[i])
    if length == w:
        state.updates += 1
        return
    o_old = int(state.offsets[i])
    raw_i = state.raw[i]
    core_old = raw_i[o_old : o_old + w]
    cl.stats.core_counts -= core_old
    rem = cl.stats.core_counts
    tables = state.tables
    n_offsets = length - w + 1
    logws = np.empty(n_offsets)
    for o in range(n_offsets):
        core = raw_i[o : o + w]
        logws[o] = tables.log_dm_matrix_cached(core + rem) - state.core_bg_dot(i, o, w)
    o_new = _categorical(logws, rng)
    cl.stats.core_counts += raw_i[o_new : o_new + w]
    state._refresh(cl)
    if o_new != o_old:
        state.offsets[i] = o_new
        state.background += state.core_base_sums(
            i, o_old, w
        ) - state.core_base_sums(i, o_new, w)
    state.updates += 1


def resample_width(state: SamplerState, cid: int, rng: np.random.Generator) -> None:
    """Gibbs update of one cluster's core width.

    Support runs from wmin to the widest core every member can still hold at
    its current offset.  Weight of width w: the first w column marginals of
    the (prefix-shared) stacked member counts, the background term for
    columns beyond w, and the width prior.
    """
    cl = state.clusters[cid]
    hyper = state.hyper
    members = sorted(cl.members)
    top = min(int(state.lengths[m]) - int(state.offsets[m]) for m in members)
    wmin = hyper.wmin
    w_old = cl.stats.width
    if top == wmin:
        state.updates += 1
        return
    stacked = np.zeros((top, 4), dtype=np.int64)
    for m in members:
        o = int(state.offsets[m])
        stacked += state.raw[m][o : o + top]
    tables = state.tables
    sums = stacked.sum(axis=1)
    tables.ensure(int(sums.max(initial=0)))
    col_dm = (
        tables._t1[stacked].sum(axis=1) - tables._t4[sums] + tables.log_const
    )
    col_bg = stacked @ hyper.log_theta0
    cum = np.cumsum(col_dm - col_bg)
    ws = np.arange(wmin, top + 1)
    prior = ws * math.log(hyper.lam) - hyper.lam - np.array(
        [math.lgamma(v) for v in ws]
    )
    logws = cum[ws - 1] + prior
    w_new = wmin + _categorical(logws, rng)
    if w_new != w_old:
        old_sums = stacked[:w_old].sum(axis=0)
        new_sums = stacked[:w_new].sum(axis=0)
        cl.stats.core_counts = stacked[:w_new].copy()
        cl.stats.width = int(w_new)
        state.background += old_sums - new_sums
        state._refresh(cl)
    state.updates += 1


# ------------------------------------------------------------------ run loop


def run(
    data: Sequence[MotifRecord],
    hyper: Hyperparameters,
    config: RunConfig,
    rng: np.random.Generator | None = None,
) -> RunTrace:
    """Run the sampler; returns the trace with series, snapshots and best state."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    state = init_state(data, hyper, rng, init_mode=config.init_mode)
    n = state.n_motifs()
    logp0 = state.log_joint_fast()
    initial = state.snapshot(0, logp0)
    best = initial
    log_joint_series = np.empty(config.iterations)
    n_clusters_series = np.empty(config.iterations, dtype=np.int64)
    snapshots: list[Snapshot] = []
    next_audit = config.audit_every

    for t in range(1, config.iterations + 1):
        state.iteration = t
        for i in range(n):
            resample_assignment(state, i, rng)
        if config.align_every is not None and t % config.align_every == 0:
            for i in range(n):
                resample_alignment(state, i, rng)
        for cid in sorted(state.clusters):
            resample_width(state, cid, rng)
        logp = state.log_joint_fast()
        log_joint_series[t - 1] = logp
        n_clusters_series[t - 1] = len(state.clusters)
        post_burn = t > config.burn_in
        record = (
            config.record_trace
            and post_burn
            and (t - config.burn_in - 1) % config.thin == 0
        )
        if record or (post_burn and logp > best.log_joint):
            snap = state.snapshot(t, logp)
            if record:
                snapshots.append(snap)
            if post_burn and logp > best.log_joint:
                best = snap
        if next_audit is not None and state.updates >= next_audit:
            state.audit()
            next_audit += config.audit_every
    return RunTrace(
        ids=list(state.ids),
        config=config,
        hyper=hyper,
        initial=initial,
        log_joint_series=log_joint_series,
        n_clusters_series=n_clusters_series,
        snapshots=snapshots,
        best=best,
    )


# ------------------------------------------------------------- reconstruction


def state_from_snapshot(
    data: Sequence[MotifRecord], hyper: Hyperparameters, snap: Snapshot
) -> SamplerState:
    """Rebuild a full sampler state from a recorded snapshot."""
    state = SamplerState(data, hyper)
    state.offsets = np.asarray(snap.offsets, dtype=np.int64).copy()
    for lab in range(snap.widths.shape[0]):
        members = {i for i in range(state.n_motifs()) if int(snap.z[i]) == lab}
        if not members:
            raise ValueError(f"snapshot cluster {lab} has no members")
        w = int(snap.widths[lab])
        counts = np.zeros((w, 4), dtype=np.int64)
        for i in members:
            o = int(state.offsets[i])
            counts += state.core(i, o, w)
        cid = state._new_cluster(w, counts, members)
        for i in members:
            state.z[i] = cid
            state.background += state.totals[i] - state.core_base_sums(i, int(state.offsets[i]), w)
    state.audit()
    return state


def log_joint_of_snapshot(
    data: Sequence[MotifRecord], hyper: Hyperparameters, snap: Snapshot
) -> float:
    """Recompute a snapshot's joint log density from raw matrices alone."""
    widths = {lab: int(snap.widths[lab]) for lab in range(snap.widths.shape[0])}
    raw = [rec.matrix.counts for rec in data]
    return log_joint_from_arrays(snap.z, snap.offsets, widths, raw, hyper)


def membership_probability(
    state: SamplerState, i: int
) -> dict[int | None, float]:
    """Single-site assignment conditional at the current state, normalized.

    Same weights resample_assignment draws from; the None key is the
    new-cluster option.  The state is restored exactly afterwards.
    """
    o_before = int(state.offsets[i])
    cid_old, prev_width = state.detach(i)
    cids, logws = _assignment_weights(state, i, prev_width)
    probs = np.exp(logws - logws.max())
    probs /= probs.sum()
    out: dict[int | None, float] = {
        cid: float(p) for cid, p in zip(cids, probs[:-1])
    }
    out[None] = float(probs[-1])
    # restore: re-create the old cluster if the detach retired it
    if cid_old in state.clusters:
        state.attach(i, cid_old)
    else:
        counts = state.core(i, o_before, prev_width).copy()
        state.clusters[cid_old] = _Cluster(
            ClusterStats(width=prev_width, core_counts=counts, member_count=1),
            {i},
            state.tables.log_dm_matrix(counts),
        )
        state.z[i] = cid_old
        state.background += state.totals[i] - state.core_base_sums(
            i, o_before, prev_width
        )
    return out


def own_cluster_probability(state: SamplerState, i: int) -> float:
    """Probability the conditional reassigns motif i to where it sits now
    (for singletons: the probability of standing alone)."""
    cid = int(state.z[i])
    solo = state.clusters[cid].stats.member_count == 1
    probs = membership_probability(state, i)
    return probs[None] if solo else probs[cid]
