"""Factorial parameter sweep: generate, transform and score every grid point."""
from __future__ import annotations

import configparser
import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .measures import MEASURES, MeasureError, all_dissimilarities
from .partition import reference_partition
from .transforms import KINDS, TransformError, TransformSpec, apply_transform

log = logging.getLogger(__name__)

CSV_HEADER = ("n", "k", "h", "q", "transform", "measure", "y", "out_of_range")
SIGNIFICANT_DIGITS = 12
WORKERS_ENV = "MEASURE_BENCH_WORKERS"


class SweepError(ValueError):
    pass


class CsvFormatError(ValueError):
    pass


def tenths(x) -> float:
    """Snap a grid value to its exact decimal so grouping keys match."""
    return round(float(x), 10)


@dataclass(frozen=True)
class GridConfig:
    n_values: tuple[int, ...]
    k_values: tuple[int, ...]
    h_values: tuple[float, ...]
    q_values: tuple[float, ...]
    transforms: tuple[str, ...] = KINDS
    measures: tuple[str, ...] = MEASURES

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(v) for v in self.n_values))
        object.__setattr__(self, "k_values", tuple(int(v) for v in self.k_values))
        object.__setattr__(self, "h_values", tuple(tenths(v) for v in self.h_values))
        object.__setattr__(self, "q_values", tuple(tenths(v) for v in self.q_values))
        object.__setattr__(self, "transforms", tuple(self.transforms))
        object.__setattr__(self, "measures", tuple(self.measures))
        for name in ("n_values", "k_values", "h_values", "q_values", "transforms", "measures"):
            if not getattr(self, name):
                raise SweepError(f"{name} must not be empty")
        if min(self.n_values) < 2:
            raise SweepError("n values must be >= 2")
        if min(self.k_values) < 1:
            raise SweepError("k values must be >= 1")
        for name in ("h_values", "q_values"):
            if not all(0 <= v <= 1 for v in getattr(self, name)):
                raise SweepError(f"{name} must lie in [0, 1]")
        for t in self.transforms:
            if t not in KINDS:
                raise SweepError(f"unknown transformation {t!r}")
        for m in self.measures:
            if m not in MEASURES:
                raise SweepError(f"unknown measure {m!r}")

    @property
    def pair_count(self) -> int:
        return (len(self.n_values) * len(self.k_values) * len(self.h_values)
                * len(self.q_values) * len(self.transforms))

    def as_dict(self) -> dict:
        return {key: list(value) for key, value in asdict(self).items()}


def default_grid() -> GridConfig:
    return GridConfig(
        n_values=tuple(range(3240, 12961, 1080)),
        k_values=tuple(range(2, 12)),
        h_values=tuple(i / 10 for i in range(10)),
        q_values=tuple(i / 10 for i in range(1, 11)),
    )


_CONFIG_KEYS = {
    "n_values": int, "k_values": int, "h_values": float, "q_values": float,
    "transforms": str, "measures": str,
}


def load_grid_config(path, base: GridConfig | None = None) -> GridConfig:
    """Read ``key = comma separated values`` lines; unspecified keys come from ``base``."""
    parser = configparser.ConfigParser()
    text = Path(path).read_text()
    parser.read_string("[grid]\n" + text if not text.lstrip().startswith("[") else text)
    section = parser["grid"] if parser.has_section("grid") else parser.defaults()
    values = (base or default_grid()).as_dict()
    for key, raw in section.items():
        if key not in _CONFIG_KEYS:
            raise SweepError(f"{path}: unknown key {key!r}")
        convert = _CONFIG_KEYS[key]
        values[key] = [convert(item.strip()) for item in raw.split(",") if item.strip()]
    return GridConfig(**values)


@dataclass(frozen=True)
class ScoreRecord:
    n: int
    k: int
    h: float
    q: float
    transform: str
    measure: str
    y: float
    out_of_range: bool = False


@dataclass(frozen=True)
class GridPointError:
    n: int
    k: int
    h: float
    q: float | None
    transform: str | None
    message: str


@dataclass
class SweepResult:
    records: list[ScoreRecord]
    errors: list[GridPointError] = field(default_factory=list)
    # onc at q = 1 collapses to one cluster; admitted to keep the full grid
    full_onc_admitted: bool = False


def quantize(y: float) -> float:
    """Round to the precision written to CSV, so in-memory and on-disk tables agree."""
    return float(f"{y:.{SIGNIFICANT_DIGITS}g}")


def _score_base(args):
    n, k, h, q_values, transforms, measures = args
    records, errors = [], []
    try:
        reference = reference_partition(n, k, h)
    except ValueError as exc:
        return records, [GridPointError(n, k, h, None, None, str(exc))]
    for q in q_values:
        for t in transforms:
            try:
                transformed = apply_transform(reference, TransformSpec(t, q), allow_full_onc=True)
                scores = all_dissimilarities(reference, transformed, measures)
            except (TransformError, MeasureError) as exc:
                errors.append(GridPointError(n, k, h, q, t, str(exc)))
                continue
            for m in measures:
                s = scores[m]
                records.append(ScoreRecord(n, k, h, q, t, m, quantize(s.dissimilarity), s.out_of_range))
    return records, errors


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else (os.cpu_count() or 1)
    if workers < 1:
        raise SweepError("workers must be >= 1")
    return workers


def sort_key(config: GridConfig):
    t_rank = {t: i for i, t in enumerate(config.transforms)}
    m_rank = {m: i for i, m in enumerate(config.measures)}
    return lambda r: (r.n, r.k, r.h, r.q, t_rank[r.transform], m_rank[r.measure])


def run_sweep(config: GridConfig, workers: int | None = None) -> SweepResult:
    """Score every grid point; output order is canonical whatever the worker count."""
    workers = resolve_workers(workers)
    jobs = [(n, k, h, config.q_values, config.transforms, config.measures)
            for n in config.n_values for k in config.k_values for h in config.h_values]
    if workers == 1:
        parts = list(map(_score_base, jobs))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_score_base, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    records = [r for recs, _ in parts for r in recs]
    errors = [e for _, errs in parts for e in errs]
    records.sort(key=sort_key(config))
    if errors:
        log.warning("%d grid points could not be evaluated and are excluded", len(errors))
    full_onc = "onc" in config.transforms and 1.0 in config.q_values
    return SweepResult(records, errors, full_onc)


def format_real(x: float) -> str:
    s = f"{x:.{SIGNIFICANT_DIGITS}g}"
    if not any(c in s for c in ".einn"):
        s += ".0"
    return s


def write_csv(records, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow((r.n, r.k, format_real(r.h), format_real(r.q), r.transform, r.measure,
                             format_real(r.y), "true" if r.out_of_range else "false"))
    os.replace(tmp, path)


def _parse_bool(text: str) -> bool:
    if text == "true":
        return True
    if text == "false":
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def read_csv(path) -> list[ScoreRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        missing = [c for c in CSV_HEADER if c not in header]
        if missing:
            raise CsvFormatError(f"{path}: missing column(s) {', '.join(missing)}")
        idx = [header.index(c) for c in CSV_HEADER]
        records = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise CsvFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            n, k, h, q, t, m, y, oor = (row[i] for i in idx)
            try:
                rec = ScoreRecord(int(n), int(k), float(h), float(q), t, m, float(y), _parse_bool(oor))
            except ValueError as exc:
                raise CsvFormatError(f"{path}:{lineno}: {exc}") from None
            if t not in KINDS or m not in MEASURES:
                raise CsvFormatError(f"{path}:{lineno}: unknown transform/measure {t!r}/{m!r}")
            records.append(rec)
    return records


def write_errors_csv(errors, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("n", "k", "h", "q", "transform", "message"))
        for e in errors:
            writer.writerow((e.n, e.k, format_real(e.h), "" if e.q is None else format_real(e.q),
                             e.transform or "", e.message))
