"""Acceptance gate: one test per release criterion, run in criterion order.

Every test prints a single "criterion N (<label>): PASS|FAIL" line and the
terminal summary repeats them as a block (hook in conftest).  The
long-running checks assert their own wall-clock budgets, so a pass here
also certifies the advertised runtimes on this machine.
"""

import collections
import functools
import json
import math
import time

import numpy as np

from conftest import MA0011_JASPAR, ma0011_counts
from motifclust.cli import entry
from motifclust.kernels import (
    ClusterStats,
    Hyperparameters,
    PriorKind,
    cluster_strength,
    log_dm_column,
    log_joint_from_arrays,
    log_partition_prior,
)
from motifclust.matrices import CountMatrix, MotifRecord, consensus_string, frequency_matrix
from motifclust.parsers import parse_jaspar, write_jaspar
from motifclust.priorsim import PriorSimConfig, iter_set_partitions, run_prior_sim
from motifclust.sampler import RunConfig, run
from motifclust.summaries import pairwise_probabilities
from motifclust.synthetic import planted_motif_groups, shifted_core_collection
from motifclust.traceio import trace_bytes

RESULTS: list[tuple[int, str, str]] = []


def criterion(number: int, label: str):
    """Record and print the verdict line whether the body passes or raises."""

    def wrap(fn):
        @functools.wraps(fn)
        def inner(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                RESULTS.append((number, label, "FAIL"))
                print(f"criterion {number} ({label}): FAIL")
                raise
            RESULTS.append((number, label, "PASS"))
            print(f"criterion {number} ({label}): PASS")

        return inner

    return wrap


def _partition_sets(z) -> frozenset[frozenset[int]]:
    groups: dict[int, set[int]] = {}
    for i, lab in enumerate(z):
        groups.setdefault(int(lab), set()).add(i)
    return frozenset(frozenset(g) for g in groups.values())


# --- criterion 1 -----------------------------------------------------------
# Four width-3 motifs with width == wmin, so offsets and widths are pinned
# and the partition posterior can be enumerated over all 15 set partitions.
# Two loose pairs with visible cross-pair leakage keep the target mixed
# (exact co-clustering probabilities span 0.02 .. 0.88).

_ORACLE_ROWS = {
    "a1": [[3, 1, 1, 0], [0, 3, 1, 1], [1, 0, 3, 1]],
    "a2": [[2, 2, 1, 0], [1, 2, 1, 1], [0, 1, 3, 1]],
    "b1": [[0, 1, 1, 3], [1, 1, 3, 0], [3, 1, 0, 1]],
    "b2": [[1, 0, 2, 2], [0, 2, 2, 1], [2, 2, 0, 1]],
}


def _enumerated_pairwise(raws: list[np.ndarray], hyper: Hyperparameters) -> np.ndarray:
    n = len(raws)
    width = raws[0].shape[0]
    partitions = list(iter_set_partitions(n))
    log_w = np.array(
        [
            log_joint_from_arrays(
                np.asarray(z), np.zeros(n, dtype=int), {c: width for c in set(z)}, raws, hyper
            )
            for z in partitions
        ]
    )
    weights = np.exp(log_w - log_w.max())
    weights /= weights.sum()
    pairwise = np.zeros((n, n))
    for wt, z in zip(weights, partitions):
        za = np.asarray(z)
        pairwise += wt * (za[:, None] == za[None, :])
    return pairwise


@criterion(1, "exact posterior oracle")
def test_criterion_1_gibbs_matches_enumerated_posterior():
    raws = [np.array(rows, dtype=np.int64) for rows in _ORACLE_ROWS.values()]
    records = [
        MotifRecord(id=name, matrix=CountMatrix(rows))
        for name, rows in _ORACLE_ROWS.items()
    ]
    hyper = Hyperparameters(alpha=1.0, b=1.0, lam=3.0, wmin=3)
    exact = _enumerated_pairwise(raws, hyper)

    start = time.perf_counter()
    trace = run(records, hyper, RunConfig(iterations=200_000, burn_in=20_000, seed=11))
    elapsed = time.perf_counter() - start

    sampled = pairwise_probabilities(trace).p
    deviation = float(np.abs(sampled - exact).max())
    assert deviation <= 0.02, f"max pairwise deviation {deviation:.4f} exceeds 0.02"
    assert elapsed < 60.0, f"200k iterations took {elapsed:.1f}s, budget is 60s"


# --- criterion 2 -----------------------------------------------------------


def _sequential_log_prob(z: tuple[int, ...], hyper: Hyperparameters) -> float:
    # Independent re-derivation of the sequential construction: the first
    # item opens its cluster with probability 1, each later item joins an
    # existing cluster with weight n_c (DP) or 1 (uniform) and opens a new
    # one with weight b.
    sizes: dict[int, int] = {}
    lp = 0.0
    for i, lab in enumerate(z):
        if i == 0:
            sizes[lab] = 1
            continue
        if hyper.prior_kind is PriorKind.DP:
            denom = sum(sizes.values()) + hyper.b
            join = {c: s for c, s in sizes.items()}
        else:
            denom = len(sizes) + hyper.b
            join = {c: 1.0 for c in sizes}
        if lab in sizes:
            lp += math.log(join[lab] / denom)
            sizes[lab] += 1
        else:
            lp += math.log(hyper.b / denom)
            sizes[lab] = 1
    return lp


def _dp_closed_form(z: tuple[int, ...], b: float) -> float:
    sizes = collections.Counter(z)
    n = len(z)
    lp = len(sizes) * math.log(b)
    lp += sum(math.lgamma(s) for s in sizes.values())
    lp -= sum(math.log(b + i - 1) for i in range(1, n + 1))
    return lp


@criterion(2, "partition prior normalization")
def test_criterion_2_prior_sums_to_one_and_matches_closed_forms():
    for kind in (PriorKind.DP, PriorKind.UNIFORM):
        for b in (1.0, 2.5):
            hyper = Hyperparameters(alpha=1.0, b=b, prior_kind=kind)
            for n in range(2, 9):
                total = 0.0
                for z in iter_set_partitions(n):
                    lp = log_partition_prior(z, hyper)
                    total += math.exp(lp)
                    assert abs(lp - _sequential_log_prob(z, hyper)) <= 1e-12
                    if kind is PriorKind.DP:
                        assert abs(lp - _dp_closed_form(z, b)) <= 1e-12
                assert abs(total - 1.0) <= 1e-10, (
                    f"{kind.value} prior, n={n}, b={b}: partition masses sum to {total!r}"
                )


# --- criterion 3 -----------------------------------------------------------


@criterion(3, "kernel spot values")
def test_criterion_3_column_marginal_and_strength_spot_values():
    assert abs(log_dm_column((2, 0, 0, 0), 1.0) - math.log(0.1)) <= 1e-9

    hyper = Hyperparameters(alpha=1.0, b=1.0, lam=1.0, wmin=1)
    core = np.array([[2, 0, 0, 0]], dtype=np.int64)
    stats = ClusterStats(width=1, core_counts=core * 2, member_count=2)
    strength = cluster_strength([core, core], stats, hyper)
    expected = math.log(1.0 / 35.0) - 2.0 * math.log(0.1)
    assert abs(strength - expected) <= 1e-9
    assert abs(strength - 1.049822) <= 5e-7


# --- criterion 4 -----------------------------------------------------------


@criterion(4, "prior behaviour at n=106")
def test_criterion_4_prior_simulation_contrasts():
    dp = Hyperparameters(alpha=1.0, b=1.0, prior_kind=PriorKind.DP)
    uniform = Hyperparameters(alpha=1.0, b=1.0, prior_kind=PriorKind.UNIFORM)

    stats_dp = run_prior_sim(
        PriorSimConfig(n=106, replicates=1000, hyper=dp), np.random.default_rng(3)
    )
    stats_un = run_prior_sim(
        PriorSimConfig(n=106, replicates=1000, hyper=uniform), np.random.default_rng(4)
    )
    assert stats_un.median_multi_member_count > stats_dp.median_multi_member_count
    assert stats_dp.max_cluster_size > stats_un.max_cluster_size

    stats_10k = run_prior_sim(
        PriorSimConfig(n=106, replicates=10_000, hyper=dp), np.random.default_rng(5)
    )
    harmonic = sum(1.0 / i for i in range(1, 107))
    assert abs(stats_10k.mean_cluster_count - harmonic) <= 0.1, (
        f"mean cluster count {stats_10k.mean_cluster_count:.4f} vs harmonic {harmonic:.4f}"
    )


# --- criterion 5 -----------------------------------------------------------
# Cores planted at offset 0 with lam equal to the raw length: the
# deterministic init then starts every motif aligned at full width, so the
# run must both keep the planted grouping and trim the width from 12 to the
# true core width 8 against the prior pull toward 12.


@criterion(5, "planted partition and width recovery")
def test_criterion_5_two_planted_groups_recovered():
    truth = planted_motif_groups(
        n_groups=2, members=10, core_width=8, length=12, sites=20,
        peak=0.85, seed=7, core_offset=0,
    )
    raw_len = truth.records[0].width
    hyper = Hyperparameters(alpha=1.0, b=1.0, lam=float(raw_len), wmin=6)
    planted = _partition_sets(truth.z)
    first_members = [truth.group_members(g)[0] for g in range(2)]

    start = time.perf_counter()
    successes = 0
    for run_seed in range(20):
        trace = run(
            truth.records,
            hyper,
            RunConfig(iterations=500, burn_in=150, seed=run_seed, align_every=1),
        )
        if _partition_sets(trace.best.z) != planted:
            continue
        modal_widths = [
            collections.Counter(
                int(s.widths[int(s.z[m])]) for s in trace.snapshots
            ).most_common(1)[0][0]
            for m in first_members
        ]
        successes += modal_widths == [truth.core_width] * 2
    elapsed = time.perf_counter() - start

    assert successes >= 19, f"partition+width recovered in only {successes}/20 runs"
    assert elapsed < 300.0, f"20 runs took {elapsed:.1f}s, budget is 300s"


# --- criterion 6 -----------------------------------------------------------
# Families of same-profile motifs; per family the trimmed members admit a
# single placement that pins the absolute frame, and one full-length member
# carries a known shift the sampler has to find.


@criterion(6, "planted alignment recovery")
def test_criterion_6_known_shifts_recovered():
    truth = shifted_core_collection(n_families=5, anchors_per_family=3, seed=1)
    hyper = Hyperparameters(alpha=1.0, b=1.0, lam=12.0, wmin=6)
    n = len(truth.records)
    need = math.ceil(0.95 * n)

    for run_seed in (0, 1, 2):
        trace = run(
            truth.records,
            hyper,
            RunConfig(iterations=300, burn_in=100, seed=run_seed, align_every=1),
        )
        correct = sum(
            collections.Counter(
                int(s.offsets[i]) for s in trace.snapshots
            ).most_common(1)[0][0]
            == int(truth.offsets[i])
            for i in range(n)
        )
        assert correct >= need, (
            f"run seed {run_seed}: modal offsets correct for {correct}/{n} motifs"
        )


# --- criterion 7 -----------------------------------------------------------

_MA0011_PRINTED_FREQS = np.array(
    [
        [0.25, 0.08, 0.08, 0.58],
        [0.42, 0.17, 0.08, 0.33],
        [0.00, 0.83, 0.00, 0.17],
        [0.00, 0.08, 0.00, 0.92],
        [1.00, 0.00, 0.00, 0.00],
        [0.08, 0.08, 0.17, 0.67],
        [0.17, 0.00, 0.08, 0.75],
        [0.08, 0.17, 0.08, 0.67],
    ]
)


@criterion(7, "reference record fidelity")
def test_criterion_7_ma0011_counts_frequencies_consensus():
    records = parse_jaspar(MA0011_JASPAR)
    assert [r.id for r in records] == ["MA0011"]
    counts = records[0].matrix

    assert np.array_equal(counts.counts, ma0011_counts())
    rounded = np.round(frequency_matrix(counts).freqs, 2)
    assert np.array_equal(rounded, _MA0011_PRINTED_FREQS)

    consensus = consensus_string(counts)
    assert consensus == "taCTAttt"
    # position 7 is the strict-boundary case: T sits at exactly 9/12 = 0.75
    assert counts.counts[6, 3] == 9 and consensus[6] == "t"


# --- criterion 8 -----------------------------------------------------------


@criterion(8, "determinism and statistics audit")
def test_criterion_8_seed_determinism_and_incremental_audit():
    truth = planted_motif_groups(
        n_groups=2, members=3, core_width=8, length=12, sites=20, peak=0.85, seed=3
    )
    hyper = Hyperparameters(alpha=1.0, b=1.0, lam=8.0, wmin=6)

    config = RunConfig(iterations=200, burn_in=40, seed=42, align_every=5)
    first = run(truth.records, hyper, config)
    second = run(truth.records, hyper, config)
    assert trace_bytes(first) == trace_bytes(second)

    other = run(truth.records, hyper, RunConfig(iterations=200, burn_in=40, seed=43, align_every=5))
    assert trace_bytes(other) != trace_bytes(first)

    # 700 iterations x 6 motifs x 2 sweeps = 8400 state updates, so the
    # from-scratch rebuild comparison fires 8 times; it raises on any
    # incremental drift.
    audited = run(
        truth.records,
        hyper,
        RunConfig(iterations=700, burn_in=100, seed=9, align_every=1, audit_every=1000),
    )
    assert audited.snapshots


# --- criterion 9 -----------------------------------------------------------
# Full-collection runs need a motif snapshot that cannot ship with the
# repository, so the pipeline contract is exercised on a synthetic stand-in
# with the same shape: 111 records of which 106 survive the width filter.


def _synthetic_snapshot() -> list[MotifRecord]:
    rng = np.random.default_rng(2004)
    records = []
    for i in range(100):
        width = int(rng.integers(6, 15))
        profile = rng.dirichlet(np.full(4, 0.5), size=width)
        counts = np.stack([rng.multinomial(20, p) for p in profile])
        records.append(MotifRecord(id=f"SYN{i:04d}", matrix=CountMatrix(counts)))
    for g in range(2):
        profile = rng.dirichlet(np.full(4, 0.3), size=8)
        for k in range(3):
            counts = np.stack([rng.multinomial(20, p) for p in profile])
            records.append(MotifRecord(id=f"FAM{g}{k}", matrix=CountMatrix(counts)))
    for i in range(5):
        width = int(rng.integers(3, 6))
        profile = rng.dirichlet(np.full(4, 0.5), size=width)
        counts = np.stack([rng.multinomial(20, p) for p in profile])
        records.append(MotifRecord(id=f"NARROW{i}", matrix=CountMatrix(counts)))
    order = rng.permutation(len(records))
    return [records[i] for i in order]


@criterion(9, "full collection pipeline")
def test_criterion_9_snapshot_scale_end_to_end(tmp_path):
    records = _synthetic_snapshot()
    assert len(records) == 111
    snapshot = tmp_path / "snapshot.jaspar"
    snapshot.write_text(write_jaspar(records))
    out = tmp_path / "out"

    rc = entry(
        [
            "cluster",
            "--input", str(snapshot),
            "--format", "jaspar",
            "--alpha", "1", "--b", "1", "--lambda", "8", "--min-width", "6",
            "--iters", "300", "--seed", "0",
            "--out", str(out),
        ]
    )
    assert rc == 0

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["records"]["parsed"] == 111
    assert manifest["records"]["retained"] == 106

    report = (out / "report.txt").read_text().splitlines()
    assert report[0] == "rank\tsize\tstrength\twidth\tconsensus"
    ranked = [line for line in report[1:] if line and line[0].isdigit()]
    assert ranked, "no multi-member clusters in the report"
    first = ranked[0].split("\t")
    assert first[0] == "1" and int(first[1]) >= 2

    supers = parse_jaspar((out / "supermatrices.jaspar").read_text())
    assert len(supers) == len(ranked)
