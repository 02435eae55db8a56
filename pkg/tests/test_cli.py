import gzip
import json
from pathlib import Path

import numpy as np
import pytest

from motifclust import CountMatrix, MotifRecord
from motifclust.cli import entry
from motifclust.parsers import parse_jaspar, write_jaspar
from motifclust.synthetic import planted_motif_groups
from motifclust.traceio import load_trace

SUMMARY_FILES = [
    "pairwise.tsv",
    "tree.nwk",
    "report.txt",
    "supermatrices.jaspar",
    "width_intervals.tsv",
    "ic_table.tsv",
    "diagnostics.json",
]


@pytest.fixture()
def motif_file(tmp_path):
    truth = planted_motif_groups(n_groups=2, members=3, peak=0.9, seed=7, core_offset=0)
    path = tmp_path / "motifs.jaspar"
    path.write_text(write_jaspar(truth.records))
    return path


def cluster_args(motif_file, out, **extra):
    args = [
        "cluster",
        "--input", str(motif_file),
        "--lambda", "12",
        "--iters", "60",
        "--align-every", "1",
        "--seed", "5",
        "--out", str(out),
    ]
    for flag, value in extra.items():
        name = "--" + flag.replace("_", "-")
        if value is True:
            args.append(name)
        else:
            args.extend([name, str(value)])
    return args


def tree_of(out):
    return {p.name: p.read_bytes() for p in Path(out).iterdir()}


class TestCluster:
    def test_end_to_end_outputs(self, motif_file, tmp_path):
        out = tmp_path / "run"
        assert entry(cluster_args(motif_file, out)) == 0
        for name in SUMMARY_FILES + ["manifest.json", "parsed_records.json",
                                     "trace_chain00.jsonl"]:
            assert (out / name).exists(), name
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["records"]["parsed"] == 6
        assert manifest["records"]["retained"] == 6
        assert manifest["hyper"]["lam"] == 12.0
        # digests cover every non-manifest file in the directory
        files = {p.name for p in out.iterdir()} - {"manifest.json"}
        assert set(manifest["digests"]) == files

    def test_nothing_written_outside_out(self, motif_file, tmp_path):
        before = set(tmp_path.iterdir())
        out = tmp_path / "run"
        assert entry(cluster_args(motif_file, out)) == 0
        assert set(tmp_path.iterdir()) == before | {out}

    def test_rerun_is_byte_identical(self, motif_file, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert entry(cluster_args(motif_file, out1)) == 0
        assert entry(cluster_args(motif_file, out2)) == 0
        t1, t2 = tree_of(out1), tree_of(out2)
        assert set(t1) == set(t2)
        for name in t1:
            assert t1[name] == t2[name], name

    def test_different_seed_changes_traces(self, motif_file, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert entry(cluster_args(motif_file, out1)) == 0
        assert entry(cluster_args(motif_file, out2, seed=6)) == 0
        a = (out1 / "trace_chain00.jsonl").read_bytes()
        b = (out2 / "trace_chain00.jsonl").read_bytes()
        assert a != b

    def test_multi_chain_outputs(self, motif_file, tmp_path):
        out = tmp_path / "run"
        assert entry(cluster_args(motif_file, out, chains=2)) == 0
        assert (out / "trace_chain01.jsonl").exists()
        assert (out / "pairwise_chain00.tsv").exists()
        assert (out / "pairwise_chain01.tsv").exists()
        diag = json.loads((out / "diagnostics.json").read_text())
        assert len(diag["chains"]) == 2
        assert diag["chains"][0]["seed"] != diag["chains"][1]["seed"]
        assert 0 <= diag["max_cross_chain_pairwise_difference"] <= 1

    def test_compressed_traces(self, motif_file, tmp_path):
        out = tmp_path / "run"
        assert entry(cluster_args(motif_file, out, trace_gz=True)) == 0
        path = out / "trace_chain00.jsonl.gz"
        assert path.exists()
        trace = load_trace(path)
        assert trace.config.iterations == 60

    def test_env_var_out(self, motif_file, tmp_path, monkeypatch):
        out = tmp_path / "env_run"
        monkeypatch.setenv("MOTIFCLUST_OUT", str(out))
        args = cluster_args(motif_file, out)
        args = args[: args.index("--out")]  # drop --out, rely on env
        assert entry(args) == 0
        assert (out / "manifest.json").exists()

    def test_width_filter_recorded(self, tmp_path):
        rng = np.random.default_rng(0)
        records = [
            MotifRecord(id=f"wide{k}", matrix=CountMatrix(rng.integers(1, 9, (8, 4))))
            for k in range(4)
        ] + [
            MotifRecord(id=f"thin{k}", matrix=CountMatrix(rng.integers(1, 9, (5, 4))))
            for k in range(2)
        ]
        path = tmp_path / "mixed.jaspar"
        path.write_text(write_jaspar(records))
        out = tmp_path / "run"
        assert entry(cluster_args(path, out)) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["records"]["parsed"] == 6
        assert manifest["records"]["retained"] == 4
        dropped = {d["id"] for d in manifest["records"]["dropped"]}
        assert dropped == {"thin0", "thin1"}


class TestExitCodes:
    def test_missing_out_is_usage_error(self, motif_file, monkeypatch, capsys):
        monkeypatch.delenv("MOTIFCLUST_OUT", raising=False)
        args = cluster_args(motif_file, "ignored")
        args = args[: args.index("--out")]
        assert entry(args) == 1
        assert "--out" in capsys.readouterr().err

    def test_bad_flag_value_is_usage_error(self, motif_file, tmp_path):
        with pytest.raises(SystemExit) as exc:
            entry(cluster_args(motif_file, tmp_path / "r", iters=0))
        assert exc.value.code == 1

    def test_bad_theta0_is_usage_error(self, motif_file, tmp_path, capsys):
        rc = entry(cluster_args(motif_file, tmp_path / "r", theta0="0.5,0.5,0.5,0.5"))
        assert rc == 1
        assert "theta0" in capsys.readouterr().err

    def test_unreadable_input(self, tmp_path, capsys):
        rc = entry(cluster_args(tmp_path / "absent.jaspar", tmp_path / "r"))
        assert rc == 2
        assert "absent.jaspar" in capsys.readouterr().err

    def test_malformed_input(self, tmp_path, capsys):
        bad = tmp_path / "bad.jaspar"
        bad.write_text(">m1\nA [ 1 2 ]\nC [ 3 ]\nG [ 4 5 ]\nT [ 6 7 ]\n")
        rc = entry(cluster_args(bad, tmp_path / "r"))
        assert rc == 2
        assert "bad.jaspar" in capsys.readouterr().err

    def test_duplicate_ids_rejected(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        rec = MotifRecord(id="dup", matrix=CountMatrix(rng.integers(1, 9, (8, 4))))
        path = tmp_path / "dup.jaspar"
        path.write_text(write_jaspar([rec, rec]))
        assert entry(cluster_args(path, tmp_path / "r")) == 2
        assert "dup" in capsys.readouterr().err

    def test_strict_columns(self, tmp_path, capsys):
        ragged = MotifRecord(
            id="ragged",
            matrix=CountMatrix([[5, 5, 5, 5], [1, 2, 3, 4], [9, 9, 9, 9],
                                [5, 5, 5, 5], [5, 5, 5, 5], [5, 5, 5, 5]]),
        )
        path = tmp_path / "ragged.jaspar"
        path.write_text(write_jaspar([ragged]))
        assert entry(cluster_args(path, tmp_path / "r1")) == 0  # accepted by default
        assert entry(cluster_args(path, tmp_path / "r2", strict_columns=True)) == 2
        assert "unequal position totals" in capsys.readouterr().err

    def test_all_motifs_too_narrow(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        recs = [MotifRecord(id="a", matrix=CountMatrix(rng.integers(1, 9, (4, 4))))]
        path = tmp_path / "thin.jaspar"
        path.write_text(write_jaspar(recs))
        assert entry(cluster_args(path, tmp_path / "r")) == 2
        assert "narrower" in capsys.readouterr().err


class TestSummarize:
    def run_once(self, motif_file, tmp_path, **extra):
        out = tmp_path / "run"
        assert entry(cluster_args(motif_file, out, **extra)) == 0
        return out

    def test_regenerates_byte_identical(self, motif_file, tmp_path):
        out = self.run_once(motif_file, tmp_path)
        before = tree_of(out)
        for name in SUMMARY_FILES:
            (out / name).unlink()
        assert entry(["summarize", "--out", str(out)]) == 0
        after = tree_of(out)
        assert set(after) == set(before)
        for name in SUMMARY_FILES:
            assert after[name] == before[name], name

    def test_level_monotonicity(self, motif_file, tmp_path):
        out = self.run_once(motif_file, tmp_path)

        def intervals():
            rows = (out / "width_intervals.tsv").read_text().splitlines()[1:]
            return {r.split("\t")[0]: (int(r.split("\t")[1]), int(r.split("\t")[2]))
                    for r in rows}

        assert entry(["summarize", "--out", str(out), "--level", "0.95"]) == 0
        wide = intervals()
        assert entry(["summarize", "--out", str(out), "--level", "0.5"]) == 0
        narrow = intervals()
        for rid in wide:
            assert wide[rid][0] <= narrow[rid][0] <= narrow[rid][1] <= wide[rid][1]

    def test_missing_trace_named(self, motif_file, tmp_path, capsys):
        out = self.run_once(motif_file, tmp_path)
        (out / "trace_chain00.jsonl").unlink()
        assert entry(["summarize", "--out", str(out)]) == 3
        assert "trace_chain00.jsonl" in capsys.readouterr().err

    def test_tampered_trace_digest_mismatch(self, motif_file, tmp_path, capsys):
        out = self.run_once(motif_file, tmp_path)
        path = out / "trace_chain00.jsonl"
        path.write_text(path.read_text().replace("log_joint", "log_jo1nt", 1))
        assert entry(["summarize", "--out", str(out)]) == 3
        assert "digest mismatch" in capsys.readouterr().err

    def test_tampered_input_digest_mismatch(self, motif_file, tmp_path, capsys):
        out = self.run_once(motif_file, tmp_path)
        motif_file.write_text(motif_file.read_text() + "\n")
        assert entry(["summarize", "--out", str(out)]) == 3
        assert "digest mismatch" in capsys.readouterr().err

    def test_missing_manifest(self, tmp_path, capsys):
        out = tmp_path / "nothing"
        out.mkdir()
        assert entry(["summarize", "--out", str(out)]) == 3
        assert "manifest" in capsys.readouterr().err

    def test_bad_level_usage_error(self, motif_file, tmp_path):
        out = self.run_once(motif_file, tmp_path)
        assert entry(["summarize", "--out", str(out), "--level", "1.0"]) == 1

    def test_works_with_compressed_traces(self, motif_file, tmp_path):
        out = self.run_once(motif_file, tmp_path, trace_gz=True)
        before = tree_of(out)
        assert entry(["summarize", "--out", str(out)]) == 0
        assert tree_of(out) == before


class TestPriorSim:
    def test_both_priors_two_files(self, tmp_path):
        out = tmp_path / "sim"
        rc = entry(["prior-sim", "--n", "10", "--replicates", "300",
                    "--seed", "3", "--out", str(out)])
        assert rc == 0
        dp = (out / "prior_sim_dp.tsv").read_text()
        uni = (out / "prior_sim_uniform.tsv").read_text()
        assert dp.startswith("# prior-sim histogram v1\tprior=dp\tn=10")
        assert uni.startswith("# prior-sim histogram v1\tprior=uniform")
        assert dp != uni

    def test_seeded_determinism_and_stream_separation(self, tmp_path):
        both, again, single = tmp_path / "a", tmp_path / "b", tmp_path / "c"
        base = ["prior-sim", "--n", "8", "--replicates", "200", "--seed", "11"]
        assert entry(base + ["--out", str(both)]) == 0
        assert entry(base + ["--out", str(again)]) == 0
        assert entry(base + ["--prior", "uniform", "--out", str(single)]) == 0
        a = (both / "prior_sim_uniform.tsv").read_bytes()
        assert a == (again / "prior_sim_uniform.tsv").read_bytes()
        # a lone uniform run reproduces the same table as the combined run
        assert a == (single / "prior_sim_uniform.tsv").read_bytes()
        assert not (single / "prior_sim_dp.tsv").exists()

    def test_zero_replicates_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            entry(["prior-sim", "--n", "5", "--replicates", "0",
                   "--out", str(tmp_path / "x")])
        assert exc.value.code == 1

    def test_bad_b_usage_error(self, tmp_path, capsys):
        rc = entry(["prior-sim", "--n", "5", "--replicates", "10",
                    "--b", "-1", "--out", str(tmp_path / "x")])
        assert rc == 1
        assert "--b" in capsys.readouterr().err


class TestVersionFlag:
    def test_version_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            entry(["--version"])
        assert exc.value.code == 0
        assert "motifclust" in capsys.readouterr().out
