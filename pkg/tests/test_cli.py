import csv
import io
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from trajsearch.cli import aggregate, main
from trajsearch.embeddings import save_vectors, table_from_vectors
from trajsearch.index import load_index
from trajsearch.model import TrajectoryCorpus
from trajsearch.snapshot import load_corpus, save_corpus
from trajsearch.synthetic import uniform_corpus

GOLDEN = Path(__file__).parent / "data" / "golden_checkins.csv"


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def example_two(tmp_path):
    path = tmp_path / "ex2.bin"
    seqs = [["K", "A", "F", "D"], ["M", "O", "A", "B", "F", "C", "P", "E"]]
    vocab = sorted({x for s in seqs for x in s})
    corpus = TrajectoryCorpus.from_ids([[vocab.index(x) for x in s] for s in seqs], vocab)
    save_corpus(corpus, path)
    return path


@pytest.fixture
def synth(tmp_path):
    corpus = uniform_corpus(100, 20, 3, 10, seed=3)
    path = tmp_path / "synth.bin"
    save_corpus(corpus, path)
    rng = np.random.default_rng(0)
    vec = tmp_path / "v.txt"
    save_vectors(table_from_vectors(rng.normal(size=(20, 4)), corpus.vocabulary), vec)
    return path, vec


def test_ingest_writes_snapshot_and_report(tmp_path, capsys):
    out = tmp_path / "c.bin"
    assert main(["ingest", str(GOLDEN), "-o", str(out)]) == 0
    assert '"trajectories_kept": 6' in capsys.readouterr().out
    corpus = load_corpus(out)
    assert len(corpus) == 6 and corpus.external(0) == ["A", "B", "C"]
    again = tmp_path / "c2.bin"
    assert main(["ingest", str(GOLDEN), "-o", str(again), "--report", str(tmp_path / "r.json")]) == 0
    assert out.read_bytes() == again.read_bytes()
    assert (tmp_path / "r.json").read_text().startswith("{")


def test_ingest_missing_file(tmp_path, capsys):
    assert main(["ingest", str(tmp_path / "nope.csv"), "-o", str(tmp_path / "c.bin")]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_build_index_1p_stats(tmp_path, capsys):
    corpus = TrajectoryCorpus.from_sequences([["A", "B"], ["B", "C"]])
    save_corpus(corpus, tmp_path / "c.bin")
    assert main(["build-index", "--corpus", str(tmp_path / "c.bin"), "--mode", "1p", "-o",
                 str(tmp_path / "i.bin")]) == 0
    out = capsys.readouterr().out
    assert "entries: 3" in out and "build_time_ms" in out
    assert load_index(tmp_path / "i.bin").kind == "1p"


def test_build_index_contextual_requires_vectors(synth, tmp_path, capsys, monkeypatch):
    corpus, vec = synth
    monkeypatch.delenv("TRAJSEARCH_VECTORS", raising=False)
    assert main(["build-index", "--corpus", str(corpus), "--mode", "contextual", "--epsilon", "0.8",
                 "-o", str(tmp_path / "i.bin")]) == 1
    assert main(["build-index", "--corpus", str(corpus), "--mode", "contextual", "--epsilon", "0.8",
                 "--vectors", str(vec), "-o", str(tmp_path / "i.bin")]) == 0
    assert "kind: contextual" in capsys.readouterr().out


def test_contextual_at_one_prints_1p_stats(synth, tmp_path, capsys):
    corpus, vec = synth
    main(["build-index", "--corpus", str(corpus), "--mode", "1p", "-o", str(tmp_path / "a.bin")])
    one = capsys.readouterr().out.splitlines()
    main(["build-index", "--corpus", str(corpus), "--mode", "contextual", "--epsilon", "1",
          "--vectors", str(vec), "-o", str(tmp_path / "b.bin")])
    ctx = capsys.readouterr().out.splitlines()
    assert one[1:3] == ctx[1:3]


@pytest.mark.parametrize("mode", ["index-1p", "index-2p", "baseline"])
def test_query_example_two(example_two, capsys, mode):
    assert main(["query", "--corpus", str(example_two), "--mode", mode, "-S", "0.6", "A", "B", "C", "D", "E"]) == 0
    assert capsys.readouterr().out.split() == ["1"]


def test_query_verify_with_saved_index(synth, tmp_path, capsys):
    corpus, vec = synth
    c = load_corpus(corpus)
    main(["build-index", "--corpus", str(corpus), "--mode", "2p", "-o", str(tmp_path / "i2.bin")])
    capsys.readouterr()
    q = c.external(5)
    assert main(["query", "--corpus", str(corpus), "--index", str(tmp_path / "i2.bin"), "--mode", "2p",
                 "-S", "1.0", "--verify", *q]) == 0
    captured = capsys.readouterr()
    assert "5" in captured.out.split() and "verify: ok" in captured.err
    assert main(["query", "--corpus", str(corpus), "--vectors", str(vec), "--mode", "contextual",
                 "--epsilon", "0.7", "-S", "0.5", "--verify", *q]) == 0
    # a saved index of the wrong kind is a usage error
    assert main(["query", "--corpus", str(corpus), "--index", str(tmp_path / "i2.bin"), "--mode", "1p", *q]) == 1


def test_query_unknown_poi_warns(example_two, capsys):
    assert main(["query", "--corpus", str(example_two), "-S", "0.5", "A", "B", "ZZZ"]) == 0
    captured = capsys.readouterr()
    assert "unknown POI 'ZZZ'" in captured.err and captured.out.split() == ["1"]


def test_query_env_override(example_two, capsys, monkeypatch):
    monkeypatch.setenv("TRAJSEARCH_CORPUS", str(example_two))
    assert main(["query", "-S", "0.6", "A", "B", "C", "D", "E"]) == 0
    assert capsys.readouterr().out.split() == ["1"]


def test_query_without_corpus_is_usage_error(monkeypatch, capsys):
    monkeypatch.delenv("TRAJSEARCH_CORPUS", raising=False)
    assert main(["query", "A"]) == 1


def test_verify_mismatch_exit_code(example_two, capsys, monkeypatch):
    import trajsearch.cli as cli
    monkeypatch.setattr(cli, "baseline_ids", lambda *a, **k: np.array([0], dtype=np.int32))
    assert main(["query", "--corpus", str(example_two), "-S", "0.6", "--verify", "A", "B", "C", "D", "E"]) == 3
    assert "MISMATCH" in capsys.readouterr().err


def test_bench_rows_and_aggregate(synth, tmp_path):
    corpus, _ = synth
    rows_path, agg_path = tmp_path / "rows.csv", tmp_path / "agg.csv"
    assert main(["bench", "--corpus", str(corpus), "--modes", "baseline,1p", "-S", "0.5",
                 "-o", str(rows_path), "--aggregate", str(agg_path)]) == 0
    rows = _rows(rows_path.read_text())
    assert len(rows) == 200
    by = {}
    for r in rows:
        by.setdefault(r["query_id"], {})[r["mode"]] = int(r["result_count"])
        assert float(r["wall_time"]) > 0 and r["epsilon"] == ""
    assert all(v["baseline"] == v["index-1p"] for v in by.values())
    agg = _rows(agg_path.read_text())
    assert {a["mode"] for a in agg} == {"baseline", "index-1p"}
    assert sum(int(a["queries"]) for a in agg) == 200
    assert all(a["std_wall_time"] != "" for a in agg)


def test_bench_sample_seed_and_jobs(synth, tmp_path, capsys):
    corpus, _ = synth
    assert main(["bench", "--corpus", str(corpus), "--modes", "2p", "--sample", "10", "--seed", "4",
                 "-S", "0.5,0.8"]) == 0
    first = _rows(capsys.readouterr().out)
    assert len(first) == 20
    assert main(["bench", "--corpus", str(corpus), "--modes", "2p", "--sample", "10", "--seed", "4",
                 "-S", "0.5,0.8", "--jobs", "3"]) == 0
    second = _rows(capsys.readouterr().out)
    strip = lambda rs: [{k: v for k, v in r.items() if k != "wall_time"} for r in rs]
    assert strip(first) == strip(second)
    assert all(r["wall_time"] == "" for r in second)


def test_aggregate_mean_and_std():
    from trajsearch.cli import BenchRow
    rows = [BenchRow(i, 3, 0.5, "index-1p", None, 1, t, 0, 0) for i, t in enumerate([1.0, 3.0])]
    (a,) = aggregate(rows)
    assert a["mean_wall_time"] == 2.0 and a["std_wall_time"] == 1.0 and a["queries"] == 2


def test_epsilon_sweep(synth, capsys):
    corpus, vec = synth
    assert main(["epsilon-sweep", "--corpus", str(corpus), "--vectors", str(vec), "--sample", "30"]) == 0
    rows = _rows(capsys.readouterr().out)
    eps = [float(r["epsilon"]) for r in rows]
    assert eps == [0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0]
    extra = [float(r["mean_extra_pct"]) for r in rows]
    assert all(x >= 0 for x in extra) and extra[-1] == 0.0
    assert all(a >= b for a, b in zip(extra, extra[1:]))
    assert float(rows[-1]["mean_neighborhood_size"]) == 1.0


def test_train_embeddings(synth, tmp_path, capsys):
    corpus, _ = synth
    out1, out2 = tmp_path / "a.txt", tmp_path / "b.txt"
    assert main(["train-embeddings", "--corpus", str(corpus), "-o", str(out1), "--epochs", "2"]) == 0
    assert main(["train-embeddings", "--corpus", str(corpus), "-o", str(out2), "--epochs", "2"]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert Path(str(out1) + ".meta.json").exists()


def test_bad_corpus_file_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"nonsense")
    assert main(["query", "--corpus", str(bad), "A"]) == 2


def test_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["query", "--mode", "4p", "A"])
    assert exc.value.code == 1


def test_console_entry_point(example_two):
    proc = subprocess.run([sys.executable, "-m", "trajsearch.cli", "query", "--corpus", str(example_two),
                           "-S", "0.6", "A", "B", "C", "D", "E"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.split() == ["1"]
