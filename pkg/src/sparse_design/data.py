"""Containers and CSV ingestion for sparse longitudinal samples.

The on-disk formats are long-format CSVs:

* ``longitudinal.csv`` with header ``subject_id,time,value`` (one row per
  measurement, ``.`` decimal, comma separator),
* ``responses.csv`` with header ``subject_id,response`` (one row per subject).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataFormatError


@dataclass(frozen=True)
class Domain:
    """Closed time interval on which all curves live."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError(f"domain requires lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, t: np.ndarray | float) -> np.ndarray | bool:
        return (np.asarray(t) >= self.lo) & (np.asarray(t) <= self.hi)


@dataclass(frozen=True)
class Grid:
    """Strictly increasing evaluation grid spanning a domain end to end."""

    domain: Domain
    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least 2 points")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if pts[0] != self.domain.lo or pts[-1] != self.domain.hi:
            raise ValueError("grid must start at domain.lo and end at domain.hi")

    @property
    def size(self) -> int:
        return int(self.points.size)

    @property
    def spacing(self) -> np.ndarray:
        """Per-interval widths; sums to the domain width."""
        return np.diff(self.points)

    def trapezoid_weights(self) -> np.ndarray:
        """Quadrature weights so that ``w @ f`` is the trapezoid integral of f."""
        w = np.zeros(self.size)
        d = self.spacing
        w[:-1] += d / 2
        w[1:] += d / 2
        return w

    def integrate(self, values: np.ndarray) -> float:
        return float(self.trapezoid_weights() @ np.asarray(values, dtype=float))

    def indices_of(self, times: Sequence[float]) -> np.ndarray:
        """Map times to grid indices, requiring an (almost) exact match."""
        t = np.asarray(times, dtype=float)
        atol = 1e-9 * max(1.0, self.domain.width)
        idx = np.searchsorted(self.points, t)
        idx = np.clip(idx, 0, self.size - 1)
        # searchsorted may land one slot right of the nearest point
        left = np.clip(idx - 1, 0, self.size - 1)
        use_left = np.abs(self.points[left] - t) < np.abs(self.points[idx] - t)
        idx = np.where(use_left, left, idx)
        if np.any(np.abs(self.points[idx] - t) > atol):
            bad = t[np.abs(self.points[idx] - t) > atol]
            raise ValueError(f"times not on the grid: {bad.tolist()}")
        return idx.astype(int)


def make_grid(domain: Domain, size: int) -> Grid:
    """Equispaced grid with both endpoints included."""
    if size < 2:
        raise ValueError(f"grid size must be >= 2, got {size}")
    return Grid(domain, np.linspace(domain.lo, domain.hi, size))


@dataclass(frozen=True)
class SubjectRecord:
    """Irregular observations for one subject, times ascending."""

    id: str
    times: np.ndarray
    values: np.ndarray

    @property
    def m(self) -> int:
        return int(self.times.size)


@dataclass(frozen=True)
class SparseSample:
    """A collection of per-subject sparse observations on a shared domain.

    Immutable after construction; safe to share across concurrent readers.
    """

    subjects: tuple[SubjectRecord, ...]
    domain: Domain

    @property
    def n(self) -> int:
        return len(self.subjects)

    def ids(self) -> list[str]:
        return [s.id for s in self.subjects]

    def get(self, subject_id: str) -> SubjectRecord:
        for s in self.subjects:
            if s.id == subject_id:
                return s
        raise KeyError(subject_id)

    @staticmethod
    def from_records(
        records: Iterable[tuple[str, Sequence[float], Sequence[float]]],
        domain: Domain | None = None,
    ) -> "SparseSample":
        """Build a sample from (id, times, values) triples.

        Times are sorted ascending per subject (values carried along), empty
        subjects are dropped with a warning, and the domain is inferred from
        the observed range when not given.
        """
        subjects: list[SubjectRecord] = []
        duplicated: list[str] = []
        for sid, times, values in records:
            t = np.asarray(times, dtype=float)
            v = np.asarray(values, dtype=float)
            if t.size != v.size:
                raise ValueError(f"subject {sid!r}: times and values differ in length")
            if t.size == 0:
                warnings.warn(f"subject {sid!r} has no observations and is dropped")
                continue
            order = np.argsort(t, kind="stable")
            t, v = t[order], v[order]
            if np.any(np.diff(t) == 0):
                duplicated.append(str(sid))
            subjects.append(SubjectRecord(str(sid), t, v))
        if not subjects:
            raise ValueError("sample contains no subjects with observations")
        if duplicated:
            warnings.warn(
                "duplicate observation times within subject(s) "
                f"{duplicated}; rows are kept and pooled by the smoothers"
            )
        if domain is None:
            lo = min(float(s.times[0]) for s in subjects)
            hi = max(float(s.times[-1]) for s in subjects)
            if lo == hi:
                hi = lo + 1.0  # degenerate single-time sample
            domain = Domain(lo, hi)
        else:
            for s in subjects:
                if s.times[0] < domain.lo or s.times[-1] > domain.hi:
                    raise ValueError(
                        f"subject {s.id!r} has observations outside the domain "
                        f"[{domain.lo}, {domain.hi}]"
                    )
        return SparseSample(tuple(subjects), domain)


@dataclass(frozen=True)
class ResponseVector:
    """Scalar response per subject, keyed by subject id."""

    values: Mapping[str, float]

    @property
    def mu_y(self) -> float:
        return float(np.mean(list(self.values.values())))

    @property
    def var_y(self) -> float:
        """Sample variance (ddof=1); 0.0 for a single subject."""
        v = np.asarray(list(self.values.values()), dtype=float)
        if v.size < 2:
            return 0.0
        return float(np.var(v, ddof=1))

    def __getitem__(self, subject_id: str) -> float:
        return self.values[subject_id]

    def __len__(self) -> int:
        return len(self.values)

    def aligned_with(self, sample: SparseSample) -> np.ndarray:
        return np.array([self.values[s.id] for s in sample.subjects])


@dataclass(frozen=True)
class Design:
    """An ordered set of measurement times, all lying on the model grid."""

    times: np.ndarray
    target: str = "trajectory"

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", t)
        if t.ndim != 1 or t.size < 1:
            raise ValueError("a design needs at least one time point")
        if np.any(np.diff(t) <= 0):
            raise ValueError("design times must be strictly increasing (distinct)")
        if self.target not in ("trajectory", "response"):
            raise ValueError(f"unknown design target {self.target!r}")

    @property
    def p(self) -> int:
        return int(self.times.size)


def load_longitudinal(path: str, domain: Domain | None = None) -> SparseSample:
    """Read a ``subject_id,time,value`` CSV into a SparseSample.

    Rows are grouped by subject and sorted by time within subject.  Malformed
    rows are reported with their 1-based file row number.  When no domain is
    given it is inferred as [min time, max time].
    """
    by_subject: dict[str, tuple[list[float], list[float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataFormatError(f"{path}: empty file")
        if [h.strip() for h in header] != ["subject_id", "time", "value"]:
            raise DataFormatError(
                f"{path}: expected header 'subject_id,time,value', got {','.join(header)!r}"
            )
        n_rows = 0
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataFormatError(f"{path}: row {rownum}: expected 3 fields, got {len(row)}")
            sid = row[0].strip()
            try:
                t = float(row[1])
                v = float(row[2])
            except ValueError:
                raise DataFormatError(
                    f"{path}: row {rownum}: non-numeric time/value {row[1]!r},{row[2]!r}"
                ) from None
            if domain is not None and not (domain.lo <= t <= domain.hi):
                raise DataFormatError(
                    f"{path}: row {rownum}: time {t} outside domain [{domain.lo}, {domain.hi}]"
                )
            by_subject.setdefault(sid, ([], []))
            by_subject[sid][0].append(t)
            by_subject[sid][1].append(v)
            n_rows += 1
    if n_rows == 0:
        raise DataFormatError(f"{path}: no data rows")
    records = [(sid, ts, vs) for sid, (ts, vs) in by_subject.items()]
    return SparseSample.from_records(records, domain=domain)


def write_longitudinal(sample: SparseSample, path: str) -> None:
    """Serialize a sample back to the long-format CSV (round-trip exact)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "time", "value"])
        for s in sample.subjects:
            for t, v in zip(s.times, s.values):
                writer.writerow([s.id, repr(float(t)), repr(float(v))])


def load_responses(path: str, sample: SparseSample) -> ResponseVector:
    """Read a ``subject_id,response`` CSV paired with ``sample``.

    Every subject of the sample must appear exactly once, and no unknown
    subjects are allowed.
    """
    known = set(sample.ids())
    values: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataFormatError(f"{path}: empty file")
        if [h.strip() for h in header] != ["subject_id", "response"]:
            raise DataFormatError(
                f"{path}: expected header 'subject_id,response', got {','.join(header)!r}"
            )
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataFormatError(f"{path}: row {rownum}: expected 2 fields, got {len(row)}")
            sid = row[0].strip()
            if sid in values:
                raise DataFormatError(f"{path}: row {rownum}: duplicate subject {sid!r}")
            if sid not in known:
                raise DataFormatError(f"{path}: row {rownum}: unknown subject {sid!r}")
            try:
                values[sid] = float(row[1])
            except ValueError:
                raise DataFormatError(
                    f"{path}: row {rownum}: non-numeric response {row[1]!r}"
                ) from None
    missing = sorted(known - set(values))
    if missing:
        raise DataFormatError(f"{path}: missing responses for subject(s) {missing}")
    ordered = {s.id: values[s.id] for s in sample.subjects}
    return ResponseVector(ordered)


def write_responses(responses: ResponseVector, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "response"])
        for sid, val in responses.values.items():
            writer.writerow([sid, repr(float(val))])
