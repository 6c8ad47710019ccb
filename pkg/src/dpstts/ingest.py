"""Raw trajectory datasets: parsing, writing and domain filtering."""
from __future__ import annotations

import csv
import json
import logging
import math
import re
import sys
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

import numpy as np

from .errors import ConfigError, EmptyDataset, MalformedRecord
from .grid import SpatioTemporalDomain

log = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400
DEFAULT_REJECT_RATIO = 0.01


@dataclass(eq=False)
class RawTrajectory:
    """One trajectory; ``points`` is an ``(n, 3)`` float array of lon, lat, time.

    Times must not decrease. Synthetic output repeats a timestamp whenever
    two consecutive cubes share a time slice, so equal times are allowed.
    """

    id: str
    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if len(self.points) > 1 and not np.all(np.diff(self.points[:, 2]) >= 0):
            raise ValueError(f"trajectory {self.id!r}: timestamps decrease")

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        return (
            isinstance(other, RawTrajectory)
            and self.id == other.id
            and np.array_equal(self.points, other.points)
        )


@dataclass(eq=False)
class RawDataset:
    trajectories: list[RawTrajectory]
    source: str = ""
    rejects: list[tuple[int, str]] = field(default_factory=list)

    def __post_init__(self):
        ids = [tr.id for tr in self.trajectories]
        if len(set(ids)) != len(ids):
            raise ValueError("trajectory ids must be unique")

    def __len__(self):
        return len(self.trajectories)

    def __iter__(self) -> Iterator[RawTrajectory]:
        return iter(self.trajectories)

    def __eq__(self, other):
        return isinstance(other, RawDataset) and self.trajectories == other.trajectories

    def n_points(self) -> int:
        return sum(len(tr) for tr in self.trajectories)


def _finish(trajectories, rejects, n_records, source, max_reject_ratio):
    if n_records == 0:
        raise EmptyDataset(f"{source}: no records")
    if rejects and len(rejects) / n_records > max_reject_ratio:
        first = ", ".join(f"line {n}: {why}" for n, why in rejects[:5])
        raise MalformedRecord(
            f"{source}: {len(rejects)} of {n_records} records rejected ({first})", rejects
        )
    for n, why in rejects:
        log.warning("%s: skipped line %d: %s", source, n, why)
    return RawDataset(trajectories, source, rejects)


def _parse_points(raw) -> np.ndarray:
    pts = np.asarray(raw, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
        raise ValueError("points must be a non-empty list of [lon, lat, time]")
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite coordinate")
    return pts


def parse_jsonl_dataset(stream: IO[str], max_reject_ratio: float = DEFAULT_REJECT_RATIO,
                        source: str = "<jsonl>") -> RawDataset:
    """Read ``{"id": ..., "points": [[lon, lat, time], ...]}`` records, one per line.

    Bad lines are collected with their line numbers; parsing aborts with
    ``MalformedRecord`` once they exceed ``max_reject_ratio`` of all records.
    """
    trajectories, rejects, seen = [], [], set()
    n_records = 0
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        n_records += 1
        try:
            rec = json.loads(line)
            tid = rec["id"]
            if not isinstance(tid, str):
                raise ValueError("id must be a string")
            if tid in seen:
                raise ValueError(f"duplicate id {tid!r}")
            tr = RawTrajectory(tid, _parse_points(rec["points"]))
        except (ValueError, KeyError, TypeError) as exc:
            rejects.append((lineno, str(exc) or type(exc).__name__))
            continue
        seen.add(tid)
        trajectories.append(tr)
    return _finish(trajectories, rejects, n_records, source, max_reject_ratio)


def write_jsonl_dataset(ds: RawDataset | Iterable[RawTrajectory], stream: IO[str]) -> None:
    for tr in ds:
        stream.write(json.dumps({"id": tr.id, "points": tr.points.tolist()}, separators=(",", ":")))
        stream.write("\n")


def dumps_jsonl_dataset(ds) -> str:
    import io

    buf = io.StringIO()
    write_jsonl_dataset(ds, buf)
    return buf.getvalue()


def parse_porto_csv(stream: IO[str], sampling_interval: float = 15,
                    max_reject_ratio: float = DEFAULT_REJECT_RATIO,
                    source: str = "<porto-csv>") -> RawDataset:
    """Read the ECML/PKDD 2015 Porto taxi CSV.

    Point ``k`` of a trip is stamped ``TIMESTAMP + k * sampling_interval``.
    Trips flagged ``MISSING_DATA`` or with an empty polyline are skipped (not
    counted as rejects). Repeated ``TRIP_ID`` values get a ``#n`` suffix.
    """
    csv.field_size_limit(sys.maxsize)
    reader = csv.DictReader(stream)
    missing = {"TRIP_ID", "TIMESTAMP", "POLYLINE"} - set(reader.fieldnames or ())
    if missing:
        raise MalformedRecord(f"{source}: missing columns {sorted(missing)}")
    trajectories, rejects = [], []
    seen: dict[str, int] = {}
    n_records = 0
    for row in reader:
        n_records += 1
        lineno = reader.line_num
        if str(row.get("MISSING_DATA", "False")).strip().lower() == "true":
            continue
        try:
            coords = json.loads(row["POLYLINE"])
            if not coords:
                continue
            lonlat = np.asarray(coords, dtype=np.float64)
            if lonlat.ndim != 2 or lonlat.shape[1] != 2:
                raise ValueError("POLYLINE must be a list of [lon, lat] pairs")
            start = float(row["TIMESTAMP"])
            times = start + sampling_interval * np.arange(len(lonlat))
            pts = _parse_points(np.column_stack((lonlat, times)))
        except (ValueError, TypeError) as exc:
            rejects.append((lineno, str(exc)))
            continue
        tid = row["TRIP_ID"]
        count = seen.get(tid, 0) + 1
        seen[tid] = count
        trajectories.append(RawTrajectory(tid if count == 1 else f"{tid}#{count}", pts))
    return _finish(trajectories, rejects, n_records, source, max_reject_ratio)


def filter_dataset(ds: RawDataset, dom: SpatioTemporalDomain, time_of_day: bool = False) -> RawDataset:
    """Keep in-domain points in order; drop trajectories left empty.

    With ``time_of_day`` the domain's time bounds are seconds since midnight
    (UTC) and retained points are re-stamped as seconds since midnight.
    """
    kept = []
    for tr in ds:
        pts = tr.points
        if time_of_day:
            pts = pts.copy()
            pts[:, 2] = np.mod(pts[:, 2], SECONDS_PER_DAY)
        pts = pts[dom.contains_many(pts)]
        if len(pts) == 0:
            continue
        if len(pts) > 1 and not np.all(np.diff(pts[:, 2]) >= 0):
            # a trip that wraps past midnight; keep the first day only
            cut = int(np.flatnonzero(np.diff(pts[:, 2]) < 0)[0]) + 1
            pts = pts[:cut]
        kept.append(tr if len(pts) == len(tr.points) and not time_of_day else RawTrajectory(tr.id, pts))
    return RawDataset(kept, ds.source)


def parse_bbox(text: str) -> tuple[float, float, float, float]:
    """``"lat_min,lon_min,lat_max,lon_max"`` (parentheses optional) -> left, right, bottom, top."""
    parts = [p for p in re.split(r"[\s,()]+", text.strip()) if p]
    try:
        lat_min, lon_min, lat_max, lon_max = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad bounding box {text!r}; expected lat_min,lon_min,lat_max,lon_max") from exc
    if not (lat_min < lat_max and lon_min < lon_max):
        raise ConfigError(f"bounding box {text!r} is empty")
    return lon_min, lon_max, lat_min, lat_max


def parse_time_window(text: str) -> tuple[float, float, bool]:
    """``"HH:MM-HH:MM"`` (time of day) or ``"start,end"`` epoch seconds.

    Returns ``(s_time, e_time, time_of_day)``.
    """
    m = re.fullmatch(r"\s*(\d{1,2}):(\d{2})\s*-\s*(\d{1,2}):(\d{2})\s*", text)
    if m:
        h1, m1, h2, m2 = (int(g) for g in m.groups())
        s, e = h1 * 3600 + m1 * 60, h2 * 3600 + m2 * 60
        if not (0 <= s < e <= SECONDS_PER_DAY and m1 < 60 and m2 < 60):
            raise ConfigError(f"bad time window {text!r}")
        return float(s), float(e), True
    parts = [p for p in re.split(r"[\s,]+", text.strip()) if p]
    try:
        s, e = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad time window {text!r}; expected HH:MM-HH:MM or start,end") from exc
    if not (math.isfinite(s) and math.isfinite(e) and s < e):
        raise ConfigError(f"bad time window {text!r}")
    return s, e, False


def make_domain(bbox: str, time_window: str) -> tuple[SpatioTemporalDomain, bool]:
    left, right, bottom, top = parse_bbox(bbox)
    s, e, tod = parse_time_window(time_window)
    return SpatioTemporalDomain(left, right, bottom, top, s, e), tod
