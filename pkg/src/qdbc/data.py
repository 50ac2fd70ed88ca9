"""Dataset loading, leave-one-out folds and report serialization."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .classifier import TrainingSet
from .encoding import DEFAULT_MODE, Scaler

CLASS_NAMES = ("A", "B", "C", "D", "E", "F", "G", "H")


class DataError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True, eq=False)
class RawDataset:
    features: np.ndarray
    species: tuple
    labels: tuple
    source: str
    mapping: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.labels)

    @property
    def classes(self) -> tuple:
        return tuple(dict.fromkeys(self.labels))

    def counts(self) -> dict:
        return {c: self.labels.count(c) for c in self.classes}


def bundled_iris() -> Path:
    return Path(str(resources.files("qdbc") / "data" / "iris.csv"))


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_iris(path=None, mapping: Mapping[str, str] | None = None,
              n_features: int = 4) -> RawDataset:
    """Read ``f1,...,f4,label`` rows; a non-numeric first row is taken as a header.

    Species are mapped to A, B, C, ... in order of first appearance unless
    ``mapping`` is given.
    """
    path = Path(path) if path is not None else bundled_iris()
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    rows, species = [], []
    first = True
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != n_features + 1:
            raise DataError(f"expected {n_features + 1} fields, got {len(row)}", lineno)
        cells = [c.strip() for c in row]
        if first and not any(_is_number(c) for c in cells[:n_features]):
            first = False
            continue
        first = False
        try:
            values = [float(c) for c in cells[:n_features]]
        except ValueError:
            raise DataError(f"non-numeric feature in {row!r}", lineno) from None
        if not all(np.isfinite(values)):
            raise DataError(f"non-finite feature in {row!r}", lineno)
        if not cells[n_features]:
            raise DataError("missing label", lineno)
        rows.append(values)
        species.append(cells[n_features])
    if not rows:
        raise DataError(f"{path} contains no data rows")

    if mapping is None:
        order = list(dict.fromkeys(species))
        if len(order) > len(CLASS_NAMES):
            raise DataError(f"too many classes ({len(order)})")
        mapping = {s: CLASS_NAMES[k] for k, s in enumerate(order)}
    missing = sorted(set(species) - set(mapping))
    if missing:
        raise DataError(f"no class mapping for species {missing}")
    labels = tuple(mapping[s] for s in species)
    return RawDataset(np.array(rows), tuple(species), labels, str(path), dict(mapping))


@dataclass(frozen=True)
class Fold:
    index: int
    test: np.ndarray
    label: object
    train: TrainingSet


def loocv_folds(features, labels: Sequence, mode: str | None = DEFAULT_MODE,
                per_fold_stats: bool = False) -> Iterator[Fold]:
    """Leave-one-out folds over ``features``.

    With ``mode`` None the features are taken as already preprocessed unit
    vectors. Otherwise preprocessing statistics are fitted on the full set
    once, or on each fold's training part when ``per_fold_stats`` is set.
    """
    raw = np.asarray(features, dtype=float)
    labels = tuple(labels)
    n = len(labels)
    if n < 2:
        raise DataError("leave-one-out needs at least 2 samples")
    if raw.shape[0] != n:
        raise DataError("one label per sample required")
    classes = tuple(dict.fromkeys(labels))

    if mode is None:
        full = raw
    elif not per_fold_stats:
        full = Scaler.fit(raw, mode).transform(raw)

    for k in range(n):
        keep = np.arange(n) != k
        if mode is not None and per_fold_stats:
            scaler = Scaler.fit(raw[keep], mode)
            x = scaler.transform(raw)
        else:
            x = full
        train = TrainingSet(x[keep], tuple(y for j, y in enumerate(labels) if j != k), classes)
        yield Fold(k, x[k], labels[k], train)


# Reports


@dataclass
class Table:
    name: str
    row_header: str
    row_labels: list
    col_labels: list
    cells: np.ndarray

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=float)
        if self.cells.ndim == 1:
            self.cells = self.cells[:, None]
        if self.cells.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValueError(f"table {self.name!r}: cell shape {self.cells.shape} does not "
                             f"match {len(self.row_labels)}x{len(self.col_labels)} labels")
        if not np.all(np.isfinite(self.cells)):
            raise ValueError(f"table {self.name!r} has non-finite cells")


@dataclass
class Report:
    tables: list[Table] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def table(self, name: str) -> Table:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def write_report(report: Report, fmt: str = "csv") -> bytes:
    """Deterministic serialization.

    ``csv``: ``# key: value`` metadata lines, then for each table a
    ``# table: name`` line followed by a header row and data rows.
    ``text``: a ``[metadata]`` block of ``key = value`` lines, then one
    ``[table name]`` block per table with whitespace-aligned columns.
    """
    out = io.StringIO()
    meta = sorted(report.metadata.items())
    if fmt == "csv":
        for k, v in meta:
            out.write(f"# {k}: {v}\n")
        w = csv.writer(out, lineterminator="\n")
        for t in report.tables:
            if len(report.tables) > 1 or meta:
                out.write(f"# table: {t.name}\n")
            w.writerow([t.row_header, *t.col_labels])
            for label, row in zip(t.row_labels, t.cells):
                w.writerow([label, *map(_fmt, row)])
    elif fmt == "text":
        out.write("[metadata]\n")
        for k, v in meta:
            out.write(f"{k} = {v}\n")
        for t in report.tables:
            out.write(f"\n[table {t.name}]\n")
            grid = [[t.row_header, *map(str, t.col_labels)]]
            grid += [[str(label), *map(_fmt, row)] for label, row in zip(t.row_labels, t.cells)]
            widths = [max(len(r[c]) for r in grid) for c in range(len(grid[0]))]
            for r in grid:
                out.write("  ".join(cell.ljust(wd) for cell, wd in zip(r, widths)).rstrip() + "\n")
    else:
        raise ValueError(f"unsupported report format {fmt!r}")
    return out.getvalue().encode()


def read_report(data: bytes, fmt: str = "csv") -> Report:
    text = data.decode()
    report = Report()
    if fmt == "csv":
        name, rows = "table", []

        def flush():
            if rows:
                header, body = rows[0], rows[1:]
                report.tables.append(Table(name, header[0], [r[0] for r in body], header[1:],
                                           [[float(c) for c in r[1:]] for r in body]))
            rows.clear()

        for line in text.splitlines():
            if line.startswith("# table: "):
                flush()
                name = line[len("# table: "):]
            elif line.startswith("# "):
                k, _, v = line[2:].partition(": ")
                report.metadata[k] = v
            elif line:
                rows.append(next(csv.reader([line])))
        flush()
    elif fmt == "text":
        section, rows = None, []

        def flush_text():
            if section and section != "metadata" and rows:
                header, body = rows[0], rows[1:]
                report.tables.append(Table(section, header[0], [r[0] for r in body], header[1:],
                                           [[float(c) for c in r[1:]] for r in body]))
            rows.clear()

        for line in text.splitlines():
            if line.startswith("[") and line.endswith("]"):
                flush_text()
                inner = line[1:-1]
                section = "metadata" if inner == "metadata" else inner[len("table "):]
            elif not line.strip():
                continue
            elif section == "metadata":
                k, _, v = line.partition(" = ")
                report.metadata[k] = v
            else:
                rows.append(line.split())
        flush_text()
    else:
        raise ValueError(f"unsupported report format {fmt!r}")
    return report
