"""Ordinal tabular datasets: schema files, CSV loading, stratified splits, synthetic data.

Schema files are plain ``key: value`` text, one declaration per line, in file
column order::

    # comments and blank lines are ignored
    name: car
    delimiter: ,
    header: false
    ordinal buying: low, med, high, vhigh
    nominal colour: red, green, blue
    ignore row_id
    target class: unacc, acc, good, vgood

``ordinal`` columns are encoded as ``position / (levels - 1)``, ``nominal``
columns are one-hot encoded, ``ignore`` columns are skipped, and the
``target`` column's levels are the ordered class list (lowest first).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .evaluation import InsufficientSamplesError
from .targets import MIN_CATEGORIES, UnsupportedCategoryCountError

BUILTIN_SCHEMAS = ("car", "nursery", "balance-scale", "hayes-roth")
COLUMN_KINDS = ("ordinal", "nominal", "ignore")


class SchemaError(ValueError):
    """Malformed schema file."""


class SchemaViolationError(ValueError):
    """A data cell does not match its schema declaration."""

    def __init__(self, message: str, row: int, column: str):
        super().__init__(f"row {row}, column {column!r}: {message}")
        self.row = row
        self.column = column


class ParseError(ValueError):
    def __init__(self, message: str, row: int):
        super().__init__(f"row {row}: {message}")
        self.row = row


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    levels: tuple[str, ...] = ()

    @property
    def width(self) -> int:
        if self.kind == "ordinal":
            return 1
        if self.kind == "nominal":
            return len(self.levels)
        return 0


@dataclass
class DatasetSchema:
    columns: list[Column]
    target: str
    classes: tuple[str, ...]
    target_position: int
    name: str = ""
    delimiter: str = ","
    header: bool = False

    def __post_init__(self):
        if len(self.classes) < MIN_CATEGORIES:
            raise SchemaError(f"target needs at least {MIN_CATEGORIES} ordered classes")
        if len(set(self.classes)) != len(self.classes):
            raise SchemaError("target classes contain duplicates")
        for col in self.columns:
            if col.kind not in COLUMN_KINDS:
                raise SchemaError(f"unknown column kind {col.kind!r}")
            if col.kind != "ignore" and len(set(col.levels)) != len(col.levels):
                raise SchemaError(f"column {col.name!r} has duplicate levels")
            if col.kind == "ordinal" and len(col.levels) < 2:
                raise SchemaError(f"ordinal column {col.name!r} needs at least two levels")
            if col.kind == "nominal" and len(col.levels) < 1:
                raise SchemaError(f"nominal column {col.name!r} needs at least one level")

    @property
    def n_fields(self) -> int:
        return len(self.columns) + 1

    @property
    def feature_names(self) -> list[str]:
        names = []
        for col in self.columns:
            if col.kind == "ordinal":
                names.append(col.name)
            elif col.kind == "nominal":
                names.extend(f"{col.name}={lv}" for lv in col.levels)
        return names

    @property
    def feature_dim(self) -> int:
        return sum(col.width for col in self.columns)

    def dumps(self) -> str:
        lines = []
        if self.name:
            lines.append(f"name: {self.name}")
        lines.append(f"delimiter: {'tab' if self.delimiter == chr(9) else self.delimiter}")
        lines.append(f"header: {'true' if self.header else 'false'}")
        fields = [(c.kind, c.name, c.levels) for c in self.columns]
        fields.insert(self.target_position, ("target", self.target, self.classes))
        for kind, name, levels in fields:
            if kind == "ignore":
                lines.append(f"ignore {name}")
            else:
                lines.append(f"{kind} {name}: {', '.join(levels)}")
        return "\n".join(lines) + "\n"


def parse_schema(text: str) -> DatasetSchema:
    opts = {"name": "", "delimiter": ",", "header": "false"}
    columns: list[Column] = []
    target = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, sep, value = line.partition(":")
        head = head.strip()
        parts = head.split()
        if len(parts) == 1 and parts[0] in opts and sep:
            opts[parts[0]] = value.strip()
            continue
        if len(parts) != 2:
            raise SchemaError(f"line {lineno}: cannot parse {raw!r}")
        kind, name = parts
        if kind == "ignore":
            columns.append(Column(name, "ignore"))
            continue
        if not sep:
            raise SchemaError(f"line {lineno}: {kind} {name!r} is missing its level list")
        levels = tuple(v.strip() for v in value.split(","))
        if any(not v for v in levels):
            raise SchemaError(f"line {lineno}: empty level in {name!r}")
        if kind == "target":
            if target is not None:
                raise SchemaError(f"line {lineno}: second target column {name!r}")
            target = (name, levels, len(columns))
        elif kind in ("ordinal", "nominal"):
            columns.append(Column(name, kind, levels))
        else:
            raise SchemaError(f"line {lineno}: unknown column kind {kind!r}")
    if target is None:
        raise SchemaError("schema declares no target column")
    delim = opts["delimiter"]
    delim = {"tab": "\t", "comma": ",", "space": " ", "semicolon": ";"}.get(delim, delim)
    if len(delim) != 1:
        raise SchemaError(f"delimiter must be a single character, got {delim!r}")
    header = opts["header"].lower()
    if header not in ("true", "false", "yes", "no"):
        raise SchemaError(f"header must be true or false, got {opts['header']!r}")
    return DatasetSchema(
        columns=columns,
        target=target[0],
        classes=target[1],
        target_position=target[2],
        name=opts["name"],
        delimiter=delim,
        header=header in ("true", "yes"),
    )


def load_schema(path) -> DatasetSchema:
    return parse_schema(Path(path).read_text())


def builtin_schema(name: str) -> DatasetSchema:
    """Schema shipped with the package for one of the four UCI ordinal datasets."""
    if name not in BUILTIN_SCHEMAS:
        raise KeyError(f"no built-in schema {name!r}; choose from {', '.join(BUILTIN_SCHEMAS)}")
    text = resources.files("ordinal_atd").joinpath("schemas", f"{name}.schema").read_text()
    return parse_schema(text)


@dataclass
class OrdinalDataset:
    features: np.ndarray  # (N, d), entries in [0, 1]
    labels: np.ndarray  # (N,) int ranks
    n_categories: int
    feature_names: list[str] = field(default_factory=list)
    provenance: str = ""
    class_names: tuple[str, ...] = ()
    source_indices: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.n_categories < MIN_CATEGORIES:
            raise UnsupportedCategoryCountError(
                f"need at least {MIN_CATEGORIES} categories, got {self.n_categories}"
            )
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise ValueError("features must be (N, d) with one label per row")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_categories):
            raise ValueError("label rank outside [0, C-1]")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain NaN or Inf")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def category_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_categories)

    def subset(self, indices) -> "OrdinalDataset":
        idx = np.asarray(indices, dtype=np.int64)
        base = self.source_indices if self.source_indices is not None else np.arange(len(self))
        return OrdinalDataset(
            self.features[idx],
            self.labels[idx],
            self.n_categories,
            list(self.feature_names),
            self.provenance,
            self.class_names,
            base[idx],
        )


def drop_categories(dataset: OrdinalDataset, ranks) -> OrdinalDataset:
    """Remove every row of the given ranks and renumber the remaining ranks in order.

    Used for classes too small to stratify (Nursery's ``recommend`` has 2 rows).
    """
    gone = sorted({int(r) for r in ranks})
    if any(not 0 <= r < dataset.n_categories for r in gone):
        raise ValueError(f"ranks {gone} outside [0, {dataset.n_categories - 1}]")
    keep_ranks = [r for r in range(dataset.n_categories) if r not in gone]
    remap = np.full(dataset.n_categories, -1, dtype=np.int64)
    remap[keep_ranks] = np.arange(len(keep_ranks))
    rows = np.flatnonzero(remap[dataset.labels] >= 0)
    base = dataset.source_indices if dataset.source_indices is not None else np.arange(len(dataset))
    names = tuple(dataset.class_names[r] for r in keep_ranks) if dataset.class_names else ()
    return OrdinalDataset(
        dataset.features[rows],
        remap[dataset.labels[rows]],
        len(keep_ranks),
        list(dataset.feature_names),
        dataset.provenance,
        names,
        base[rows],
    )


def _read_rows(path, schema: DatasetSchema) -> list[list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh, delimiter=schema.delimiter))
    if schema.header and rows:
        rows = rows[1:]
    return rows


def load_csv_ordinal(path, schema: DatasetSchema) -> OrdinalDataset:
    """Read a delimiter-separated file and encode it according to ``schema``.

    Raises:
        ParseError: a row has the wrong number of fields.
        SchemaViolationError: a cell value is missing or not among its declared levels.
    """
    rows = _read_rows(path, schema)
    first_data_row = 2 if schema.header else 1
    fields = [(c.name, c) for c in schema.columns]
    fields.insert(schema.target_position, (schema.target, None))
    class_pos = {c: i for i, c in enumerate(schema.classes)}
    level_pos = {c.name: {lv: i for i, lv in enumerate(c.levels)} for c in schema.columns}

    features = []
    labels = []
    for n, row in enumerate(rows):
        rowno = n + first_data_row
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(fields):
            raise ParseError(f"expected {len(fields)} fields, found {len(row)}", rowno)
        vec: list[float] = []
        for cell, (name, col) in zip(row, fields):
            value = cell.strip()
            if col is None:
                if value not in class_pos:
                    raise SchemaViolationError(f"unknown class {value!r}", rowno, name)
                labels.append(class_pos[value])
                continue
            if col.kind == "ignore":
                continue
            if value not in level_pos[name]:
                what = "missing value" if value in ("", "?") else f"unknown value {value!r}"
                raise SchemaViolationError(what, rowno, name)
            pos = level_pos[name][value]
            if col.kind == "ordinal":
                vec.append(pos / (len(col.levels) - 1))
            else:
                onehot = [0.0] * len(col.levels)
                onehot[pos] = 1.0
                vec.extend(onehot)
        features.append(vec)

    feat = np.array(features, dtype=np.float64).reshape(len(features), schema.feature_dim)
    return OrdinalDataset(
        feat,
        np.array(labels, dtype=np.int64),
        len(schema.classes),
        schema.feature_names,
        str(path),
        schema.classes,
    )


def decode_rows(dataset: OrdinalDataset, schema: DatasetSchema) -> list[list[str]]:
    """Map encoded features and labels back to the schema's cell values."""
    if dataset.dim != schema.feature_dim:
        raise ValueError("dataset width does not match the schema")
    ignored = [c for c in schema.columns if c.kind == "ignore"]
    if ignored:
        raise ValueError(f"cannot re-create ignored column(s) {[c.name for c in ignored]}")
    out = []
    for x, y in zip(dataset.features, dataset.labels):
        cells = []
        pos = 0
        for col in schema.columns:
            if col.kind == "ordinal":
                cells.append(col.levels[int(round(x[pos] * (len(col.levels) - 1)))])
            else:
                cells.append(col.levels[int(np.argmax(x[pos:pos + col.width]))])
            pos += col.width
        cells.insert(schema.target_position, schema.classes[int(y)])
        out.append(cells)
    return out


def write_csv_ordinal(dataset: OrdinalDataset, path, schema: DatasetSchema) -> None:
    rows = decode_rows(dataset, schema)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=schema.delimiter, lineterminator="\n")
        if schema.header:
            names = [c.name for c in schema.columns]
            names.insert(schema.target_position, schema.target)
            w.writerow(names)
        w.writerows(rows)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_indices(
    labels: Sequence[int],
    n_categories: int,
    test_fraction: float = 0.2,
    val_fraction_of_train: float = 0.2,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stratified (train, val, test) row indices, each sorted ascending.

    Per category of size n: ``round(n * test_fraction)`` rows go to test,
    ``round(rest * val_fraction_of_train)`` to validation and the remainder to
    training, with every split receiving at least one row.
    """
    for name, f in (("test_fraction", test_fraction), ("val_fraction_of_train", val_fraction_of_train)):
        if not 0.0 < f < 1.0:
            raise ValueError(f"{name} must lie in (0, 1), got {f}")
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    train, val, test = [], [], []
    for r in range(n_categories):
        members = np.flatnonzero(labels == r)
        n = len(members)
        if n < 3:
            raise InsufficientSamplesError(
                f"category {r} has {n} sample(s); a stratified three-way split needs at least 3",
                rank=r,
            )
        n_test = min(max(_round_half_up(n * test_fraction), 1), n - 2)
        rest = n - n_test
        n_val = min(max(_round_half_up(rest * val_fraction_of_train), 1), rest - 1)
        perm = rng.permutation(members)
        test.append(perm[:n_test])
        val.append(perm[n_test:n_test + n_val])
        train.append(perm[n_test + n_val:])
    return tuple(np.sort(np.concatenate(part)) for part in (train, val, test))  # type: ignore[return-value]


def split(
    dataset: OrdinalDataset,
    test_fraction: float = 0.2,
    val_fraction_of_train: float = 0.2,
    seed: int = 0,
) -> tuple[OrdinalDataset, OrdinalDataset, OrdinalDataset]:
    tr, va, te = split_indices(
        dataset.labels, dataset.n_categories, test_fraction, val_fraction_of_train, seed
    )
    return dataset.subset(tr), dataset.subset(va), dataset.subset(te)


def make_synthetic_ordinal(
    n_categories: int = 4,
    samples_per_class: int = 100,
    dim: int = 2,
    class_separation: float = 1.0,
    noise_sigma: float = 0.1,
    seed: int = 0,
) -> OrdinalDataset:
    """Gaussian blobs whose centres sit in rank order on a quarter arc.

    Class ``r`` is centred at angle ``r * (pi/2) / (C - 1)`` in the plane of
    the first two features, on a circle whose radius makes neighbouring
    centres exactly ``class_separation`` apart. Distinct directions per class
    keep the classes separable under cosine similarity. One global min-max
    map then sends all features into [0, 1] without distorting the geometry.
    """
    if n_categories < MIN_CATEGORIES:
        raise UnsupportedCategoryCountError(
            f"need at least {MIN_CATEGORIES} categories, got {n_categories}"
        )
    if dim < 2:
        raise ValueError("dim must be at least 2")
    if samples_per_class < 3:
        raise ValueError("samples_per_class must be at least 3")
    if not class_separation > 0:
        raise ValueError("class_separation must be positive")
    if noise_sigma < 0:
        raise ValueError("noise_sigma cannot be negative")
    rng = np.random.default_rng(seed)
    step = (math.pi / 2) / (n_categories - 1)
    radius = class_separation / (2.0 * math.sin(step / 2))
    labels = np.repeat(np.arange(n_categories), samples_per_class)
    centres = np.zeros((len(labels), dim))
    centres[:, 0] = radius * np.cos(labels * step)
    centres[:, 1] = radius * np.sin(labels * step)
    x = centres + noise_sigma * rng.standard_normal((len(labels), dim))
    lo = x.min()
    span = x.max() - lo
    x = (x - lo) / span
    return OrdinalDataset(
        x,
        labels,
        n_categories,
        [f"x{i}" for i in range(dim)],
        f"synthetic(C={n_categories}, n={samples_per_class}, dim={dim}, "
        f"sep={class_separation}, sigma={noise_sigma}, seed={seed})",
    )
