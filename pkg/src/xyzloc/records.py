"""Experiment records and their on-disk format.

A record is one measured series (abscissa, mean, stderr, n per row) plus the
full parameter set that produced it.  Records are written as a CSV with a
JSON sidecar carrying the parameters, seeds, and package version, so every
file reproduces itself exactly.  Numbers are written with 17 significant
digits (binary round-trip) and files are written atomically.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from ._version import __version__
from .errors import ParameterError

CSV_HEADER = "abscissa,mean,stderr,n"


@dataclass(frozen=True)
class ExperimentRecord:
    """One disorder-averaged measurement series with full provenance."""

    kind: str  # decay-vs-distance | magnetisation-vs-time | correlation-vs-time
    parameters: dict
    series: tuple[tuple[float, float, float, int], ...]


def series_csv_text(record: ExperimentRecord) -> str:
    lines = [CSV_HEADER]
    for (x, mean, stderr, n) in record.series:
        lines.append(f"{x:.17g},{mean:.17g},{stderr:.17g},{n:d}")
    return "\n".join(lines) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_record(record: ExperimentRecord, out_dir: str | Path, stem: str) -> tuple[Path, Path]:
    """Write ``stem.csv`` and ``stem.json`` under ``out_dir``; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    json_path = out_dir / f"{stem}.json"
    sidecar = {
        "kind": record.kind,
        "version": __version__,
        "series_file": csv_path.name,
        "parameters": record.parameters,
    }
    _atomic_write(csv_path, series_csv_text(record))
    _atomic_write(json_path, json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def read_record(csv_path: str | Path) -> ExperimentRecord:
    """Load a record from its CSV file; the JSON sidecar must sit next to it."""
    csv_path = Path(csv_path)
    json_path = csv_path.with_suffix(".json")
    if not json_path.exists():
        raise ParameterError(f"missing sidecar {json_path}")
    sidecar = json.loads(json_path.read_text())
    rows = []
    lines = csv_path.read_text().strip().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ParameterError(f"{csv_path} is not an experiment record")
    for line in lines[1:]:
        x, mean, stderr, n = line.split(",")
        rows.append((float(x), float(mean), float(stderr), int(n)))
    return ExperimentRecord(sidecar["kind"], sidecar["parameters"], tuple(rows))
