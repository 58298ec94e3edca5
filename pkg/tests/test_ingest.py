import io
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from trajsearch.ingest import (CheckIn, IngestConfig, IngestError, ParseStats, build_corpus, ingest_file,
                               parse_checkins)

GOLDEN = Path(__file__).parent / "data" / "golden_checkins.csv"

# hand-derived from the fixture, in (user, day) order
GOLDEN_TRAJECTORIES = [
    ["A", "B", "C"],    # alice 04-03, input out of order
    ["A", "D", "E"],    # alice 04-04
    ["F16", "A", "B"],  # alice 04-05; F16 has 16 visits and survives
    ["C", "A", "B"],    # carol 04-04, C and A tie at 09:00 and keep input order
    ["A", "D", "E"],    # dave 04-03
    ["B", "C", "D"],    # dave 04-04, split at midnight
]


def test_golden_corpus():
    corpus, report = ingest_file(GOLDEN)
    assert corpus.vocabulary == ("A", "B", "C", "D", "E", "F16")
    assert [corpus.external(i) for i in range(len(corpus))] == GOLDEN_TRAJECTORIES


def test_golden_report():
    _, r = ingest_file(GOLDEN)
    assert r.parse.rows_read == 124 and r.parse.rows_valid == 122 and r.parse.rows_malformed == 2
    assert r.parse.malformed_by_reason == {"bad timestamp": 1, "missing column": 1}
    assert r.checkins_read == 122
    assert (r.pois_seen, r.pois_kept, r.pois_filtered) == (7, 6, 1)
    assert r.checkins_dropped_poi == 15  # RARE15: exactly 15 visits is not more than 15
    assert r.trajectories_formed == 63
    assert (r.trajectories_kept, r.trajectories_too_short, r.trajectories_too_long) == (6, 56, 1)
    assert r.checkins_kept == 18 and r.checkins_dropped_size == 89
    assert r.size_histogram == {3: 6}
    assert r.reconciles()
    assert '"checkins_read": 122' in r.to_json()


def test_poi_filter_runs_before_size_filter():
    # carol 04-03 is A, RARE15, B: three check-ins, but only two once RARE15 is gone
    corpus, _ = ingest_file(GOLDEN)
    assert ["A", "B"] not in [corpus.external(i) for i in range(len(corpus))]
    lenient, _ = ingest_file(GOLDEN, IngestConfig(min_traj_len=2))
    assert ["A", "B"] in [lenient.external(i) for i in range(len(lenient))]


def test_threshold_is_strict():
    _, r = ingest_file(GOLDEN, IngestConfig(min_poi_visits=14))
    assert r.pois_kept == 7
    _, r = ingest_file(GOLDEN, IngestConfig(min_poi_visits=16))
    assert r.pois_kept == 4  # E and F16 (16 visits each) and RARE15 go


def _ts(h, m=0, day=3):
    return datetime(2012, 4, day, h, m)


def test_build_corpus_small():
    log = [CheckIn("u", p, _ts(h)) for p, h in (("c", 12), ("a", 8), ("b", 10))]
    corpus, report = build_corpus(log, IngestConfig(min_poi_visits=0))
    assert [corpus.external(0)] == [["a", "b", "c"]]
    assert report.reconciles()


def test_consecutive_duplicates_are_kept():
    log = [CheckIn("u", p, _ts(8, m)) for m, p in enumerate("aab")]
    corpus, _ = build_corpus(log, IngestConfig(min_poi_visits=0))
    assert corpus.external(0) == ["a", "a", "b"]


def test_day_split_uses_timestamp_as_written():
    tz = timezone(timedelta(hours=-5))
    log = [CheckIn("u", "a", datetime(2012, 4, 3, 22, 0, tzinfo=tz)),
           CheckIn("u", "b", datetime(2012, 4, 3, 23, 0, tzinfo=tz)),
           CheckIn("u", "c", datetime(2012, 4, 3, 23, 30, tzinfo=tz))]
    corpus, _ = build_corpus(log, IngestConfig(min_poi_visits=0))
    # in UTC these would straddle midnight; as written they are one day
    assert len(corpus) == 1 and corpus.external(0) == ["a", "b", "c"]


def test_empty_result_is_reported_not_raised():
    log = [CheckIn("u", "a", _ts(8))]
    corpus, report = build_corpus(log)
    assert len(corpus) == 0 and report.trajectories_kept == 0 and report.reconciles()


def test_parse_valid_rows():
    rows = list(parse_checkins(["u1,p1,2012-04-03T10:00:00", "u1,p2,2012-04-03T11:00:00Z", "u2,p1,2012-04-04 09:00"]))
    assert len(rows) == 3 and rows[0] == CheckIn("u1", "p1", datetime(2012, 4, 3, 10, 0))
    assert rows[1].timestamp.tzinfo is not None


def test_parse_skips_malformed_and_counts():
    stats = ParseStats()
    rows = list(parse_checkins(["u,p,garbage", "u,p,2012-04-03T10:00:00", ",p,2012-04-03T10:00:00", "", "u,p"],
                               stats=stats))
    assert len(rows) == 1
    assert stats.rows_read == 4 and stats.rows_malformed == 3
    assert stats.malformed_by_reason == {"bad timestamp": 1, "empty field": 1, "missing column": 1}


def test_parse_column_mapping_and_format():
    text = "time|venue|user\nTue Apr 03 18:00:09 2012|v9|u7\n"
    rows = list(parse_checkins(io.StringIO(text), delimiter="|", columns=(2, 1, 0),
                               time_format="%a %b %d %H:%M:%S %Y", header=True))
    assert rows == [CheckIn("u7", "v9", datetime(2012, 4, 3, 18, 0, 9))]


def test_parse_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(IngestError, match="zero valid rows"):
        list(parse_checkins(empty))
    with pytest.raises(IngestError, match="cannot read"):
        list(parse_checkins(tmp_path / "missing.csv"))


def test_config_validation():
    with pytest.raises(ValueError):
        IngestConfig(min_traj_len=0)
    with pytest.raises(ValueError):
        IngestConfig(min_traj_len=5, max_traj_len=4)
    with pytest.raises(ValueError):
        CheckIn("", "p", _ts(1))
