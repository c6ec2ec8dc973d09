"""File writers shared by every module: CSV, JSON, hashing and batch statistics."""

from __future__ import annotations

import csv
import hashlib
import json
import statistics
from collections.abc import Iterable
from collections.abc import Mapping
from collections.abc import Sequence
from math import sqrt
from pathlib import Path
from typing import Any


def _ensure_parent_dir(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


def fmt17(value: float) -> str:
    """Full double precision (17 significant digits)."""
    return format(float(value), ".17g")


def fmt6(value: float) -> str:
    return format(float(value), ".6f")


def mean_and_ci95(values: Sequence[float]) -> tuple[float, float | None, float | None]:
    if not values:
        return 0.0, None, None
    m = statistics.fmean(values)
    if len(values) < 2:
        return m, None, None
    sd = statistics.stdev(values)
    se = sd / sqrt(len(values))
    # Normal approx; sufficient for seed batches
    delta = 1.96 * se
    return m, m - delta, m + delta


def mean_and_std(values: Sequence[float]) -> tuple[float, float]:
    if not values:
        return 0.0, 0.0
    m = statistics.fmean(values)
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    return m, sd


def write_csv(path: Path, headers: Iterable[str], rows: Iterable[Iterable[object]]) -> None:
    _ensure_parent_dir(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(list(headers))
        for r in rows:
            w.writerow(list(r))


def read_csv(path: Path) -> list[dict[str, str]]:
    with path.open("r", newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def write_json(path: Path, payload: Any) -> None:
    _ensure_parent_dir(path)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def read_json(path: Path) -> Any:
    with path.open("r", encoding="utf-8") as fh:
        return json.load(fh)


def write_text(path: Path, lines: Iterable[str]) -> None:
    _ensure_parent_dir(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def canonical_hash(payload: Mapping[str, Any]) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


__all__ = [
    "fmt17",
    "fmt6",
    "mean_and_ci95",
    "mean_and_std",
    "write_csv",
    "read_csv",
    "write_json",
    "read_json",
    "write_text",
    "sha256_file",
    "canonical_hash",
]
