"""Dataset ingestion, feature-role schema, tanh-range scaling, and splits.

A dataset is a float64 matrix in physical units plus a schema tagging each
feature as simulator input or simulator output. Process-corner features are
categorical and stored as fixed numeric codes.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

log = logging.getLogger(__name__)

ROLE_INPUT = "simulator_input"
ROLE_OUTPUT = "simulator_output"

CORNER_CODES = {"TT": 0, "FF": 1, "SS": 2, "FS": 3, "SF": 4}
CORNER_NAMES = {v: k for k, v in CORNER_CODES.items()}


class DataError(ValueError):
    """Malformed schema, file, or value."""


@dataclass(frozen=True)
class Feature:
    name: str
    role: str
    unit: str = ""
    categorical: bool = False

    def __post_init__(self):
        if self.role not in (ROLE_INPUT, ROLE_OUTPUT):
            raise DataError(f"feature {self.name!r}: unknown role {self.role!r}")


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[Feature, ...]

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")
        roles = {f.role for f in self.features}
        if ROLE_INPUT not in roles or ROLE_OUTPUT not in roles:
            raise DataError("schema needs at least one simulator_input and one simulator_output feature")

    def __len__(self) -> int:
        return len(self.features)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def input_indices(self) -> list[int]:
        return [i for i, f in enumerate(self.features) if f.role == ROLE_INPUT]

    @property
    def output_indices(self) -> list[int]:
        return [i for i, f in enumerate(self.features) if f.role == ROLE_OUTPUT]

    @property
    def categorical_mask(self) -> np.ndarray:
        return np.array([f.categorical for f in self.features], dtype=bool)

    def index_of(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise DataError(f"unknown feature {name!r}")


@dataclass
class Dataset:
    schema: FeatureSchema
    values: np.ndarray  # n x d, physical units

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataError(f"dataset values must be 2-D, got shape {self.values.shape}")
        if self.values.shape[1] != len(self.schema):
            raise DataError(
                f"dataset has {self.values.shape[1]} columns but schema lists {len(self.schema)} features"
            )
        if self.values.size and not np.all(np.isfinite(self.values)):
            bad = np.argwhere(~np.isfinite(self.values))[0]
            raise DataError(f"non-finite value at row {bad[0]}, column {self.schema.names[bad[1]]!r}")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def inputs(self) -> np.ndarray:
        return self.values[:, self.schema.input_indices]

    def outputs(self) -> np.ndarray:
        return self.values[:, self.schema.output_indices]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.schema.index_of(name)]


def concat_datasets(a: Dataset, b: Dataset) -> Dataset:
    if a.schema.names != b.schema.names:
        raise DataError("datasets have different schemas")
    return Dataset(schema=a.schema, values=np.vstack([a.values, b.values]))


# ---------------------------------------------------------------------------
# schema and CSV files


def load_schema(path) -> FeatureSchema:
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    entries = doc.get("feature")
    if not entries:
        raise DataError(f"{path}: no [[feature]] entries")
    feats = []
    for e in entries:
        try:
            feats.append(
                Feature(
                    name=e["name"],
                    role=e["role"],
                    unit=e.get("unit", ""),
                    categorical=bool(e.get("categorical", False)),
                )
            )
        except KeyError as exc:
            raise DataError(f"{path}: feature entry missing key {exc}") from exc
    return FeatureSchema(features=tuple(feats))


def save_schema(path, schema: FeatureSchema) -> None:
    lines = []
    for f in schema.features:
        lines.append("[[feature]]")
        lines.append(f'name = "{f.name}"')
        lines.append(f'role = "{f.role}"')
        lines.append(f'unit = "{f.unit}"')
        lines.append(f"categorical = {'true' if f.categorical else 'false'}")
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


def load_csv(path, schema: FeatureSchema | str | Path) -> Dataset:
    """Read a dataset CSV whose header matches the schema's feature names.

    Categorical corner cells may be given as names (TT/FF/SS/FS/SF) or as
    their numeric codes.
    """
    if not isinstance(schema, FeatureSchema):
        schema = load_schema(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        missing = [n for n in schema.names if n not in header]
        if missing:
            raise DataError(f"{path}: header missing schema column(s) {missing}")
        col_of = {name: header.index(name) for name in schema.names}
        rows = []
        for r, record in enumerate(reader):
            row = np.empty(len(schema))
            for j, feat in enumerate(schema.features):
                cell = record[col_of[feat.name]].strip()
                try:
                    if feat.categorical and cell in CORNER_CODES:
                        val = float(CORNER_CODES[cell])
                    else:
                        val = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: unparseable cell at row {r + 1}, column {feat.name!r}: {cell!r}"
                    ) from None
                if not np.isfinite(val):
                    raise DataError(f"{path}: non-finite value at row {r + 1}, column {feat.name!r}")
                row[j] = val
            rows.append(row)
    values = np.array(rows) if rows else np.empty((0, len(schema)))
    return Dataset(schema=schema, values=values)


def save_csv(path, data: Dataset) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(data.schema.names)
        cat = data.schema.categorical_mask
        for row in data.values:
            out = []
            for j, v in enumerate(row):
                if cat[j] and int(round(v)) in CORNER_NAMES and abs(v - round(v)) < 1e-9:
                    out.append(CORNER_NAMES[int(round(v))])
                else:
                    out.append(repr(float(v)))
            writer.writerow(out)


# ---------------------------------------------------------------------------
# scaling


@dataclass
class MinMaxScaler:
    """Maps each feature's observed [min, max] onto [-1, 1].

    Degenerate features (max == min) transform to 0 and invert to their
    constant. Categorical features are rounded to the nearest valid code on
    inverse transform.
    """

    mins: np.ndarray
    maxs: np.ndarray
    categorical: np.ndarray = field(default_factory=lambda: np.array([], dtype=bool))

    def __post_init__(self):
        self.mins = np.asarray(self.mins, dtype=np.float64)
        self.maxs = np.asarray(self.maxs, dtype=np.float64)
        if np.any(self.maxs < self.mins):
            raise DataError("scaler max < min")
        if self.categorical.size == 0:
            self.categorical = np.zeros(self.mins.shape, dtype=bool)

    @property
    def degenerate(self) -> np.ndarray:
        return self.maxs == self.mins

    @property
    def spans(self) -> np.ndarray:
        return np.where(self.degenerate, 1.0, self.maxs - self.mins)


def fit_scaler(data: Dataset) -> MinMaxScaler:
    if data.n_rows == 0:
        raise DataError("cannot fit scaler on empty dataset")
    return MinMaxScaler(
        mins=data.values.min(axis=0),
        maxs=data.values.max(axis=0),
        categorical=data.schema.categorical_mask.copy(),
    )


def transform(scaler: MinMaxScaler, rows: np.ndarray) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[1] != scaler.mins.shape[0]:
        raise DataError(f"expected {scaler.mins.shape[0]} columns, got {rows.shape[1]}")
    scaled = 2.0 * (rows - scaler.mins) / scaler.spans - 1.0
    scaled[:, scaler.degenerate] = 0.0
    n_clamped = int(np.sum((scaled < -1.0) | (scaled > 1.0)))
    if n_clamped:
        log.warning("clamped %d out-of-range values to [-1, 1]", n_clamped)
        scaled = np.clip(scaled, -1.0, 1.0)
    return scaled


def inverse_transform(scaler: MinMaxScaler, scaled: np.ndarray) -> np.ndarray:
    scaled = np.atleast_2d(np.asarray(scaled, dtype=np.float64))
    if scaled.shape[1] != scaler.mins.shape[0]:
        raise DataError(f"expected {scaler.mins.shape[0]} columns, got {scaled.shape[1]}")
    rows = (scaled + 1.0) / 2.0 * scaler.spans + scaler.mins
    rows[:, scaler.degenerate] = np.broadcast_to(
        scaler.mins[scaler.degenerate], rows[:, scaler.degenerate].shape
    )
    if scaler.categorical.any():
        cat = scaler.categorical
        rows[:, cat] = np.clip(np.rint(rows[:, cat]), scaler.mins[cat], scaler.maxs[cat])
    return rows


# ---------------------------------------------------------------------------
# splitting


def split(data: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic disjoint, exhaustive train/test split."""
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = data.n_rows
    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, 0x5B117]))
    perm = rng.permutation(n)
    n_test = int(round(n * test_fraction))
    n_test = min(max(n_test, 1), n - 1)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return (
        Dataset(schema=data.schema, values=data.values[train_idx]),
        Dataset(schema=data.schema, values=data.values[test_idx]),
    )
