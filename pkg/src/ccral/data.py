"""Tabular data: schemas, CSV loading, encoding, splitting, synthetic data.

The encoded space is what the matching step measures distances in, so the
conventions here matter downstream:

* continuous columns are z-standardized with statistics from the fitting rows,
* categorical columns are one-hot (unseen levels become an all-zero block),
* binary columns are a single 0/1 coordinate, never standardized; this
  includes the treatment column, so flipping it is exact.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import (
    ConstantTreatment,
    DataError,
    EmptyTable,
    FileUnreadable,
    HeaderMismatch,
    InfeasibleSplit,
    LayoutMismatch,
    SchemaError,
    UnknownKind,
)

KINDS = ("continuous", "binary", "categorical")
MISSING_TOKENS = frozenset({"", "?", "NA", "N/A", "NaN", "nan", "null", "NULL"})
MIN_STD = 1e-8

REAL = 0
COUNTERFACTUAL = 1

BUILTIN_SCHEMAS = ("german", "bank", "twins", "compas", "adult")


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    levels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnknownKind(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.levels is not None:
            levels = tuple(str(v) for v in self.levels)
            object.__setattr__(self, "levels", levels)
            if not levels:
                raise SchemaError(f"column {self.name!r}: empty level list")
            if len(set(levels)) != len(levels):
                raise SchemaError(f"column {self.name!r}: duplicate levels")
            if self.kind == "binary" and len(levels) != 2:
                raise SchemaError(f"binary column {self.name!r} needs exactly 2 levels")


@dataclass(frozen=True)
class FeatureSchema:
    """Column kinds plus which column is the treatment and which the label."""

    columns: tuple[Column, ...]
    treatment: str
    treatment_one: str
    label: str
    positive_label: str

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")
        by_name = {c.name: c for c in self.columns}
        if self.treatment == self.label:
            raise SchemaError("treatment and label must be different columns")
        for role, name in (("treatment", self.treatment), ("label", self.label)):
            if name not in by_name:
                raise SchemaError(f"{role} column {name!r} not among columns")
            if by_name[name].kind != "binary":
                raise SchemaError(f"{role} column {name!r} must have kind 'binary'")
        levels = by_name[self.treatment].levels
        if levels is not None and self.treatment_one not in levels:
            raise SchemaError(f"treatment_one {self.treatment_one!r} not in declared levels")

    @property
    def names(self):
        return [c.name for c in self.columns]

    @property
    def feature_columns(self):
        return [c for c in self.columns if c.name != self.label]

    def column(self, name):
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    @classmethod
    def from_dict(cls, doc):
        try:
            columns = tuple(
                Column(c["name"], c["kind"], tuple(c["levels"]) if c.get("levels") is not None else None)
                for c in doc["columns"]
            )
            return cls(
                columns=columns,
                treatment=doc["treatment"],
                treatment_one=str(doc["treatment_one"]),
                label=doc["label"],
                positive_label=str(doc["positive_label"]),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema document: {exc!r}") from exc

    def to_dict(self):
        cols = []
        for c in self.columns:
            entry = {"name": c.name, "kind": c.kind}
            if c.levels is not None:
                entry["levels"] = list(c.levels)
            cols.append(entry)
        return {
            "columns": cols,
            "treatment": self.treatment,
            "treatment_one": self.treatment_one,
            "label": self.label,
            "positive_label": self.positive_label,
        }


def load_schema(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, UnicodeDecodeError) as exc:
        raise FileUnreadable(f"cannot read schema {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema {path} is not valid JSON: {exc}") from exc
    return FeatureSchema.from_dict(doc)


def save_schema(schema, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_dict(), fh, indent=2)
        fh.write("\n")


def builtin_schema(name):
    """One of the shipped schemas: german, bank, twins, compas, adult."""
    if name not in BUILTIN_SCHEMAS:
        raise KeyError(f"no builtin schema {name!r}; choose from {BUILTIN_SCHEMAS}")
    text = resources.files("ccral.schemas").joinpath(f"{name}.json").read_text("utf-8")
    return FeatureSchema.from_dict(json.loads(text))


@dataclass(frozen=True)
class RawTable:
    header: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]
    n_dropped: int = 0

    def __post_init__(self):
        object.__setattr__(self, "header", tuple(self.header))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        width = len(self.header)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise DataError(f"row {i} has {len(row)} cells, expected {width}")

    @property
    def n_rows(self):
        return len(self.rows)

    def column(self, name):
        j = self.header.index(name)
        return [row[j] for row in self.rows]

    def take(self, indices):
        return RawTable(self.header, tuple(self.rows[i] for i in indices))


def _cell_ok(value, kind):
    if value in MISSING_TOKENS:
        return False
    if kind == "continuous":
        try:
            return math.isfinite(float(value))
        except ValueError:
            return False
    return True


def load_csv(path, schema: FeatureSchema) -> RawTable:
    """Read a CSV file, keeping the schema's columns in schema order.

    Extra columns in the file are ignored. Rows with a missing or unparseable
    cell in any schema column are dropped; the count lands in ``n_dropped``.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            body = list(reader)
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise FileUnreadable(f"cannot read {path}: {exc}") from exc
    if header is None:
        raise EmptyTable(f"{path} is empty")
    header = [h.strip() for h in header]
    missing = [n for n in schema.names if n not in header]
    if missing:
        raise HeaderMismatch(missing)
    positions = [header.index(n) for n in schema.names]
    kinds = [c.kind for c in schema.columns]

    rows = []
    dropped = 0
    for record in body:
        if not record:
            continue
        if len(record) != len(header):
            dropped += 1
            continue
        cells = tuple(record[p].strip() for p in positions)
        if all(_cell_ok(v, k) for v, k in zip(cells, kinds)):
            rows.append(cells)
        else:
            dropped += 1
    if not rows:
        raise EmptyTable(f"{path}: no usable rows ({dropped} dropped)")
    return RawTable(tuple(schema.names), tuple(rows), dropped)


def write_csv(table: RawTable, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.header)
        writer.writerows(table.rows)


@dataclass(frozen=True)
class Encoder:
    """Frozen encoding state fitted on one table.

    ``layout`` lists ``(column, start, stop)`` coordinate ranges in order;
    they tile ``range(n_features)`` without gaps or overlap.
    """

    schema: FeatureSchema
    stats: dict
    levels: dict
    layout: tuple[tuple[str, int, int], ...]
    treatment_coord: int
    n_features: int

    def feature_names(self):
        names = []
        for name, start, stop in self.layout:
            kind = self.schema.column(name).kind
            if kind == "categorical":
                names.extend(f"{name}={lvl}" for lvl in self.levels[name])
            else:
                names.append(name)
        return names


def fit_encoder(raw: RawTable, schema: FeatureSchema) -> Encoder:
    if raw.n_rows == 0:
        raise EmptyTable("cannot fit an encoder on an empty table")
    missing = [n for n in schema.names if n not in raw.header]
    if missing:
        raise LayoutMismatch(f"table lacks schema columns: {missing}")

    stats, levels, layout = {}, {}, []
    pos = 0
    treatment_coord = -1
    for col in schema.feature_columns:
        values = raw.column(col.name)
        if col.kind == "continuous":
            arr = np.asarray(values, dtype=float)
            std = float(arr.std())
            stats[col.name] = (float(arr.mean()), max(std, MIN_STD))
            width = 1
        elif col.kind == "categorical":
            levels[col.name] = col.levels if col.levels is not None else tuple(sorted(set(values)))
            width = len(levels[col.name])
        elif col.kind == "binary":
            observed = sorted(set(values))
            if col.name == schema.treatment:
                if len(observed) < 2:
                    raise ConstantTreatment(
                        f"treatment column {col.name!r} has a single value {observed[0]!r}"
                    )
                if len(observed) > 2:
                    raise SchemaError(f"treatment column {col.name!r} has {len(observed)} values")
                if schema.treatment_one not in observed:
                    raise SchemaError(
                        f"treatment_one {schema.treatment_one!r} never occurs in {col.name!r}"
                    )
                zero = next(v for v in observed if v != schema.treatment_one)
                levels[col.name] = (zero, schema.treatment_one)
                treatment_coord = pos
            elif col.levels is not None:
                levels[col.name] = col.levels
            else:
                if len(observed) > 2:
                    raise SchemaError(f"binary column {col.name!r} has {len(observed)} values")
                levels[col.name] = tuple(observed)
            width = 1
        else:  # pragma: no cover - Column validates kinds
            raise UnknownKind(col.kind)
        layout.append((col.name, pos, pos + width))
        pos += width
    return Encoder(schema, stats, levels, tuple(layout), treatment_coord, pos)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Encoded rows: features ``X``, labels ``y``, treatment ``t``, ``origin`` flags.

    ``t`` is always the treatment coordinate of ``X``; origin is REAL or
    COUNTERFACTUAL per row. Arrays are made read-only on construction.
    """

    X: np.ndarray
    y: np.ndarray
    t: np.ndarray
    origin: np.ndarray
    treatment_coord: int
    feature_names: tuple[str, ...] | None = None
    n_unseen: int = 0

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim != 2:
            raise DataError("X must be 2-dimensional")
        n = X.shape[0]
        y = np.asarray(self.y).astype(np.int8)
        t = np.asarray(self.t).astype(np.int8)
        origin = np.asarray(self.origin).astype(np.int8)
        if y.shape != (n,) or t.shape != (n,) or origin.shape != (n,):
            raise DataError("X, y, t and origin disagree on the number of rows")
        if not np.all(np.isfinite(X)):
            raise DataError("X contains non-finite entries")
        if not (np.isin(y, (0, 1)).all() and np.isin(t, (0, 1)).all()):
            raise DataError("y and t must be 0/1")
        if not np.isin(origin, (REAL, COUNTERFACTUAL)).all():
            raise DataError("origin flags must be REAL or COUNTERFACTUAL")
        if not 0 <= self.treatment_coord < X.shape[1]:
            raise DataError(f"treatment_coord {self.treatment_coord} outside 0..{X.shape[1] - 1}")
        if not np.array_equal(X[:, self.treatment_coord], t):
            raise DataError("t disagrees with the treatment coordinate of X")
        for name, arr in (("X", X), ("y", y), ("t", t), ("origin", origin)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_arrays(cls, X, y, treatment_coord, origin=None, feature_names=None):
        X = np.asarray(X, dtype=float)
        if origin is None:
            origin = np.full(X.shape[0], REAL, dtype=np.int8)
        return cls(X, y, X[:, treatment_coord], origin, treatment_coord, feature_names)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def is_real(self):
        return self.origin == REAL

    def subset(self, indices):
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(self.X[idx], self.y[idx], self.t[idx], self.origin[idx],
                       self.treatment_coord, self.feature_names)

    def concat(self, other: "Dataset") -> "Dataset":
        if other.d != self.d or other.treatment_coord != self.treatment_coord:
            raise LayoutMismatch("cannot concatenate datasets with different layouts")
        return Dataset(
            np.vstack([self.X, other.X]),
            np.concatenate([self.y, other.y]),
            np.concatenate([self.t, other.t]),
            np.concatenate([self.origin, other.origin]),
            self.treatment_coord,
            self.feature_names,
        )


def transform(encoder: Encoder, raw: RawTable) -> Dataset:
    schema = encoder.schema
    missing = [n for n in schema.names if n not in raw.header]
    if missing:
        raise LayoutMismatch(f"table lacks encoder columns: {missing}")
    n = raw.n_rows
    X = np.zeros((n, encoder.n_features))
    unseen = 0
    for name, start, stop in encoder.layout:
        kind = schema.column(name).kind
        values = raw.column(name)
        if kind == "continuous":
            mean, std = encoder.stats[name]
            X[:, start] = (np.asarray(values, dtype=float) - mean) / std
        elif kind == "categorical":
            index = {lvl: k for k, lvl in enumerate(encoder.levels[name])}
            for i, v in enumerate(values):
                k = index.get(v)
                if k is None:
                    unseen += 1
                else:
                    X[i, start + k] = 1.0
        else:
            lv = encoder.levels[name]
            zero, one = lv[0], (lv[1] if len(lv) > 1 else None)
            if name == schema.treatment:
                bad = sorted({v for v in values if v not in (zero, one)})
                if bad:
                    raise LayoutMismatch(f"unknown treatment value(s) {bad} in {name!r}")
            for i, v in enumerate(values):
                if v == one:
                    X[i, start] = 1.0
                elif v != zero:
                    unseen += 1
    y = np.fromiter((v == schema.positive_label for v in raw.column(schema.label)),
                    dtype=np.int8, count=n)
    t = X[:, encoder.treatment_coord].astype(np.int8)
    return Dataset(X, y, t, np.full(n, REAL, dtype=np.int8), encoder.treatment_coord,
                   tuple(encoder.feature_names()), unseen)


def encode_labels(raw: RawTable, schema: FeatureSchema) -> np.ndarray:
    return np.array([v == schema.positive_label for v in raw.column(schema.label)], dtype=np.int8)


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.6
    val_frac: float = 0.2
    test_frac: float = 0.2
    seed: int = 0
    stratify: bool = True

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if not all(0.0 < f < 1.0 for f in fracs):
            raise InfeasibleSplit(f"fractions must lie in (0, 1), got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise InfeasibleSplit(f"fractions must sum to 1, got {sum(fracs)}")


def _part_sizes(n, spec):
    # floor for val/test, remainder to train; the epsilon absorbs binary float noise
    want_val, want_test = n * spec.val_frac, n * spec.test_frac
    n_val = int(math.floor(want_val + 1e-9))
    n_test = int(math.floor(want_test + 1e-9))
    # train may hold at most one row beyond its share; hand back the excess
    if n - n_val - n_test - n * spec.train_frac > 1 + 1e-9:
        if want_val - n_val >= want_test - n_test:
            n_val += 1
        else:
            n_test += 1
    return n - n_val - n_test, n_val, n_test


def split_indices(y, spec: SplitSpec):
    """Sorted (train, val, test) index arrays for labels ``y``."""
    y = np.asarray(y)
    rng = np.random.default_rng(spec.seed & ((1 << 64) - 1))
    groups = [np.flatnonzero(y == c) for c in (0, 1)] if spec.stratify else [np.arange(len(y))]
    parts = ([], [], [])
    for members in groups:
        members = rng.permutation(members)
        n_tr, n_va, _ = _part_sizes(len(members), spec)
        parts[0].append(members[:n_tr])
        parts[1].append(members[n_tr:n_tr + n_va])
        parts[2].append(members[n_tr + n_va:])
    out = tuple(np.sort(np.concatenate(p)).astype(np.intp) for p in parts)
    for name, idx in zip(("train", "val", "test"), out):
        if len(idx) == 0:
            raise InfeasibleSplit(f"{name} part would be empty (N={len(y)})")
        if spec.stratify and len(np.unique(y[idx])) < 2:
            raise InfeasibleSplit(f"{name} part would miss a label value (N={len(y)})")
    return out


def split(ds: Dataset, spec: SplitSpec):
    return tuple(ds.subset(idx) for idx in split_indices(ds.y, spec))


def synthetic_schema(d_cont):
    columns = [Column(f"x_{j + 1}", "continuous") for j in range(d_cont)]
    columns += [Column("T", "binary", ("0", "1")), Column("y", "binary", ("0", "1"))]
    return FeatureSchema(tuple(columns), treatment="T", treatment_one="1",
                         label="y", positive_label="1")


def generate_synthetic(n, d_cont, effect, noise, seed, return_latent=False):
    """Synthetic table where the treatment interacts with ``x_1``.

    ``y = 1`` iff ``w.x + effect * T * sign(x_1) + eps > 0`` with ``w`` a
    seeded unit vector and ``eps ~ Normal(0, noise)``. With
    ``return_latent=True`` also returns ``{"w", "eps", "X", "T"}`` so the
    label rule can be re-evaluated under a flipped treatment.
    """
    if n < 10 or d_cont < 1 or noise < 0:
        raise ValueError("need n >= 10, d_cont >= 1 and noise >= 0")
    rng = np.random.default_rng(seed & ((1 << 64) - 1))
    w = rng.normal(size=d_cont)
    w /= np.linalg.norm(w)
    X = rng.uniform(-1.0, 1.0, size=(n, d_cont))
    T = rng.integers(0, 2, size=n)
    eps = rng.normal(0.0, noise, size=n) if noise > 0 else np.zeros(n)
    y = (X @ w + effect * T * np.sign(X[:, 0]) + eps > 0).astype(int)

    header = tuple(f"x_{j + 1}" for j in range(d_cont)) + ("T", "y")
    rows = tuple(
        tuple(repr(float(v)) for v in X[i]) + (str(int(T[i])), str(int(y[i])))
        for i in range(n)
    )
    table = RawTable(header, rows)
    if return_latent:
        return table, {"w": w, "eps": eps, "X": X, "T": T}
    return table


class TabularEncoder(TransformerMixin, BaseEstimator):
    """Transformer wrapper around :func:`fit_encoder` / :func:`transform`.

    ``fit`` takes a :class:`RawTable`; ``transform`` returns the encoded
    feature matrix. Use ``transform_dataset`` to keep labels and treatment.
    """

    def __init__(self, schema: FeatureSchema | None = None):
        self.schema = schema

    def fit(self, X: RawTable, y=None):
        if self.schema is None:
            raise SchemaError("TabularEncoder needs a schema")
        self.encoder_ = fit_encoder(X, self.schema)
        self.n_features_out_ = self.encoder_.n_features
        self.treatment_coord_ = self.encoder_.treatment_coord
        return self

    def transform_dataset(self, X: RawTable) -> Dataset:
        check_is_fitted(self, "encoder_")
        return transform(self.encoder_, X)

    def transform(self, X: RawTable):
        return np.array(self.transform_dataset(X).X)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "encoder_")
        return np.asarray(self.encoder_.feature_names(), dtype=object)
