"""Check-in logs to a sealed corpus.

The pipeline runs in a fixed order: POI visit counting over the whole log,
then per-user, per-day segmentation, then the trajectory size filter.
Dropping a rare POI can push a day below the minimum size, so the order
changes results.
"""

from __future__ import annotations

import csv
import io
import json
import os
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from datetime import date, datetime
from typing import IO, Iterable, Iterator

from .model import TrajectoryCorpus


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class CheckIn:
    user_id: str
    poi_id: str
    timestamp: datetime

    def __post_init__(self):
        if not self.user_id or not self.poi_id:
            raise ValueError("user_id and poi_id must be non-empty")

    @property
    def day(self) -> date:
        # the calendar date of the timestamp exactly as written
        return self.timestamp.date()


@dataclass(frozen=True)
class IngestConfig:
    min_poi_visits: int = 15
    min_traj_len: int = 3
    max_traj_len: int = 30

    def __post_init__(self):
        if self.min_poi_visits < 0:
            raise ValueError(f"min_poi_visits must be >= 0, got {self.min_poi_visits}")
        if not 1 <= self.min_traj_len <= self.max_traj_len:
            raise ValueError(f"need 1 <= min_traj_len <= max_traj_len, got "
                             f"{self.min_traj_len}, {self.max_traj_len}")


@dataclass
class ParseStats:
    rows_read: int = 0
    rows_valid: int = 0
    rows_malformed: int = 0
    malformed_by_reason: dict[str, int] = field(default_factory=dict)

    def reject(self, reason: str) -> None:
        self.rows_malformed += 1
        self.malformed_by_reason[reason] = self.malformed_by_reason.get(reason, 0) + 1


@dataclass
class IngestReport:
    checkins_read: int = 0
    checkins_kept: int = 0
    checkins_dropped_poi: int = 0
    checkins_dropped_size: int = 0
    pois_seen: int = 0
    pois_kept: int = 0
    pois_filtered: int = 0
    trajectories_formed: int = 0
    trajectories_kept: int = 0
    trajectories_too_short: int = 0
    trajectories_too_long: int = 0
    size_histogram: dict[int, int] = field(default_factory=dict)
    parse: ParseStats | None = None

    def reconciles(self) -> bool:
        return (self.checkins_kept + self.checkins_dropped_poi + self.checkins_dropped_size == self.checkins_read
                and self.pois_kept + self.pois_filtered == self.pois_seen
                and self.trajectories_kept + self.trajectories_too_short + self.trajectories_too_long
                == self.trajectories_formed
                and sum(self.size_histogram.values()) == self.trajectories_kept)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["size_histogram"] = {str(k): v for k, v in sorted(self.size_histogram.items())}
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def _parse_time(text: str, time_format: str | None) -> datetime:
    text = text.strip()
    if time_format:
        return datetime.strptime(text, time_format)
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text)


def _open_lines(source) -> tuple[Iterable[str], IO | None]:
    if isinstance(source, (str, os.PathLike)):
        try:
            fh = open(source, newline="", encoding="utf-8")
        except OSError as exc:
            raise IngestError(f"cannot read {source}: {exc.strerror or exc}") from exc
        return fh, fh
    if isinstance(source, io.IOBase) or hasattr(source, "read"):
        return source, None
    return iter(source), None


def parse_checkins(source, delimiter: str = ",", columns: tuple[int, int, int] = (0, 1, 2),
                   time_format: str | None = None, header: bool = False,
                   stats: ParseStats | None = None) -> Iterator[CheckIn]:
    """Yield check-ins from delimited text.

    ``source`` is a path, an open text file, or an iterable of lines.
    ``columns`` gives the (user, poi, timestamp) column indexes. Without
    ``time_format`` timestamps are read as ISO 8601. Rows that cannot be
    parsed are counted in ``stats`` and skipped; a source with no valid row
    at all raises :class:`IngestError` once exhausted.
    """
    stats = stats if stats is not None else ParseStats()
    lines, owned = _open_lines(source)
    user_col, poi_col, time_col = columns
    need = max(columns) + 1
    try:
        reader = csv.reader(lines, delimiter=delimiter)
        if header:
            next(reader, None)
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            stats.rows_read += 1
            if len(row) < need:
                stats.reject("missing column")
                continue
            user, poi = row[user_col].strip(), row[poi_col].strip()
            if not user or not poi:
                stats.reject("empty field")
                continue
            try:
                ts = _parse_time(row[time_col], time_format)
            except ValueError:
                stats.reject("bad timestamp")
                continue
            stats.rows_valid += 1
            yield CheckIn(user, poi, ts)
    finally:
        if owned is not None:
            owned.close()
    if stats.rows_valid == 0:
        raise IngestError("zero valid rows")


def _wall_clock(ts: datetime) -> datetime:
    # ordering and day split both follow the timestamp as written
    return ts.replace(tzinfo=None)


def build_corpus(checkins: Iterable[CheckIn], config: IngestConfig = IngestConfig(),
                 parse_stats: ParseStats | None = None) -> tuple[TrajectoryCorpus, IngestReport]:
    """Run the POI filter, daily segmentation and size filter; seal the result.

    Trajectories are numbered in (user, day) order. Check-ins with equal
    timestamps keep their input order.
    """
    log = list(checkins)
    report = IngestReport(checkins_read=len(log), parse=parse_stats)

    visits = Counter(c.poi_id for c in log)
    kept_pois = {poi for poi, n in visits.items() if n > config.min_poi_visits}
    report.pois_seen = len(visits)
    report.pois_kept = len(kept_pois)
    report.pois_filtered = report.pois_seen - report.pois_kept

    days: dict[tuple[str, date], list[tuple[datetime, int, str]]] = defaultdict(list)
    for seq, c in enumerate(log):
        if c.poi_id not in kept_pois:
            report.checkins_dropped_poi += 1
            continue
        wall = _wall_clock(c.timestamp)
        days[(c.user_id, wall.date())].append((wall, seq, c.poi_id))
    report.trajectories_formed = len(days)

    sequences = []
    for key in sorted(days):
        visits_of_day = sorted(days[key])
        n = len(visits_of_day)
        if n < config.min_traj_len:
            report.trajectories_too_short += 1
            report.checkins_dropped_size += n
        elif n > config.max_traj_len:
            report.trajectories_too_long += 1
            report.checkins_dropped_size += n
        else:
            sequences.append([poi for _, _, poi in visits_of_day])
            report.size_histogram[n] = report.size_histogram.get(n, 0) + 1
            report.checkins_kept += n
    report.trajectories_kept = len(sequences)
    return TrajectoryCorpus.from_sequences(sequences), report


def ingest_file(path, config: IngestConfig = IngestConfig(), delimiter: str = ",",
                columns: tuple[int, int, int] = (0, 1, 2), time_format: str | None = None,
                header: bool = False) -> tuple[TrajectoryCorpus, IngestReport]:
    stats = ParseStats()
    rows = parse_checkins(path, delimiter, columns, time_format, header, stats)
    return build_corpus(rows, config, stats)
