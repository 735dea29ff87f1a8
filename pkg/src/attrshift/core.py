"""Dataset container and CSV/JSON file formats.

A dataset CSV has the header ``x0,...,x{m-1},y,z`` with one sample per row.
Metadata (dimension, class and attribute counts, domain tag and optional
attribute names) lives in a ``.meta.json`` sidecar next to the CSV. Weight
vectors are stored as CSV with the header ``index,weight``.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from ._validation import check_weights

SOURCE = "source"
TARGET = "target"
DOMAIN_TAGS = (SOURCE, TARGET)
UNLABELED = -1


class DatasetError(ValueError):
    """Base class for dataset parse and validation failures."""


class MalformedRowError(DatasetError):
    pass


class OutOfRangeError(DatasetError):
    pass


class NonFiniteFeatureError(DatasetError):
    pass


class LabeledSample(NamedTuple):
    features: np.ndarray
    label: int
    attribute: int


class DatasetSchema(NamedTuple):
    """Column descriptor for a dataset file."""

    dim: int
    num_classes: int
    num_attributes: int
    domain_tag: Optional[str] = None
    attribute_names: Optional[tuple] = None

    @property
    def header(self):
        return [f"x{j}" for j in range(self.dim)] + ["y", "z"]


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable set of samples ``(x, y, z)``.

    ``X`` has shape (n, dim); ``y`` holds class indices and ``z`` attribute
    indices. Target-domain datasets may carry ``y == -1`` for unlabeled rows.
    """

    X: np.ndarray
    y: np.ndarray
    z: np.ndarray
    num_classes: int
    num_attributes: int
    domain_tag: Optional[str] = None
    attribute_names: Optional[tuple] = field(default=None)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        z = np.asarray(self.z, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "X", _readonly(X))
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "z", _readonly(z))
        if self.attribute_names is not None:
            object.__setattr__(self, "attribute_names", tuple(self.attribute_names))
        self.validate()

    def validate(self):
        n = self.X.shape[0]
        if self.X.ndim != 2:
            raise DatasetError("features must be a 2-D array")
        if self.y.shape != (n,) or self.z.shape != (n,):
            raise DatasetError("features, labels and attributes must have equal length")
        if self.num_classes < 1 or self.num_attributes < 1:
            raise DatasetError("num_classes and num_attributes must be positive")
        if self.domain_tag not in (None,) + DOMAIN_TAGS:
            raise DatasetError(f"unknown domain tag {self.domain_tag!r}")
        if self.attribute_names is not None and len(self.attribute_names) != self.num_attributes:
            raise DatasetError("attribute_names length must equal num_attributes")
        bad = ~np.all(np.isfinite(self.X), axis=1)
        if bad.any():
            raise NonFiniteFeatureError(f"row {int(np.argmax(bad))}: non-finite feature")
        low = UNLABELED if self.domain_tag == TARGET else 0
        bad = (self.y < low) | (self.y >= self.num_classes)
        if bad.any():
            i = int(np.argmax(bad))
            raise OutOfRangeError(
                f"row {i}: label {self.y[i]} outside [{low}, {self.num_classes - 1}]")
        bad = (self.z < 0) | (self.z >= self.num_attributes)
        if bad.any():
            i = int(np.argmax(bad))
            raise OutOfRangeError(
                f"row {i}: attribute {self.z[i]} outside [0, {self.num_attributes - 1}]")

    @property
    def dim(self):
        return self.X.shape[1]

    @property
    def n_samples(self):
        return self.X.shape[0]

    @property
    def schema(self):
        return DatasetSchema(self.dim, self.num_classes, self.num_attributes,
                             self.domain_tag, self.attribute_names)

    def __len__(self):
        return self.X.shape[0]

    def __getitem__(self, i):
        return LabeledSample(self.X[i], int(self.y[i]), int(self.z[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.schema == other.schema
                and np.array_equal(self.X, other.X)
                and np.array_equal(self.y, other.y)
                and np.array_equal(self.z, other.z))

    __hash__ = None

    def subset(self, mask):
        """Return a new dataset holding the rows selected by ``mask``."""
        return Dataset(self.X[mask], self.y[mask], self.z[mask], self.num_classes,
                       self.num_attributes, self.domain_tag, self.attribute_names)

    def with_features(self, X):
        return Dataset(X, self.y, self.z, self.num_classes, self.num_attributes,
                       self.domain_tag, self.attribute_names)

    @classmethod
    def from_samples(cls, samples, num_classes, num_attributes, domain_tag=None):
        samples = list(samples)
        X = np.array([s.features for s in samples], dtype=float)
        return cls(X, [s.label for s in samples], [s.attribute for s in samples],
                   num_classes, num_attributes, domain_tag)


def empirical_attribute_prior(dataset):
    """Relative frequency of each attribute class in ``dataset``."""
    if len(dataset) == 0:
        raise DatasetError("cannot compute an attribute prior from an empty dataset")
    counts = np.bincount(dataset.z, minlength=dataset.num_attributes)
    return counts / counts.sum()


def meta_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def _format_float(v):
    # repr gives the shortest string that round-trips exactly (<= 17 digits)
    return repr(float(v))


def save_dataset(dataset, path):
    """Write ``dataset`` as CSV plus its ``.meta.json`` sidecar."""
    path = Path(path)
    schema = dataset.schema
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(schema.header)
        for x, y, z in zip(dataset.X, dataset.y, dataset.z):
            writer.writerow([_format_float(v) for v in x] + [int(y), int(z)])
    meta = {
        "m": schema.dim,
        "num_classes": schema.num_classes,
        "num_attributes": schema.num_attributes,
        "domain_tag": schema.domain_tag,
    }
    if schema.attribute_names is not None:
        meta["attribute_names"] = list(schema.attribute_names)
    with open(meta_path(path), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_schema(path):
    with open(meta_path(path), encoding="utf-8") as fh:
        meta = json.load(fh)
    names = meta.get("attribute_names")
    return DatasetSchema(int(meta["m"]), int(meta["num_classes"]), int(meta["num_attributes"]),
                         meta.get("domain_tag"), tuple(names) if names is not None else None)


def _parse_int(token, row, column):
    try:
        v = float(token)
    except ValueError:
        raise MalformedRowError(f"row {row}: column {column!r} is not a number: {token!r}") from None
    if not math.isfinite(v) or v != int(v):
        raise MalformedRowError(f"row {row}: column {column!r} must be an integer, got {token!r}")
    return int(v)


def load_dataset(path, schema=None):
    """Read a dataset CSV.

    Parameters
    ----------
    path : str or Path
        CSV file in the ``x0,...,x{m-1},y,z`` layout.
    schema : DatasetSchema, optional
        Column descriptor. When omitted it is read from the ``.meta.json``
        sidecar; without a sidecar the counts are inferred from the data.

    Raises
    ------
    FileNotFoundError
        The CSV does not exist.
    MalformedRowError, OutOfRangeError, NonFiniteFeatureError
        A row cannot be parsed or violates the schema. Row numbers count data
        rows from 0, excluding the header.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset file not found: {path}")
    if schema is None and meta_path(path).is_file():
        schema = read_schema(path)

    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRowError(f"{path}: empty file, missing header") from None
        header = [h.strip() for h in header]
        if schema is not None:
            if header != schema.header:
                raise MalformedRowError(f"{path}: header {header} does not match {schema.header}")
        elif len(header) < 3 or header[-2:] != ["y", "z"] or header[:-2] != [
                f"x{j}" for j in range(len(header) - 2)]:
            raise MalformedRowError(f"{path}: header must be x0,...,x{{m-1}},y,z; got {header}")
        dim = len(header) - 2
        rows_X, rows_y, rows_z = [], [], []
        for i, row in enumerate(reader):
            if not row:
                continue
            if len(row) != dim + 2:
                raise MalformedRowError(f"row {i}: expected {dim + 2} fields, got {len(row)}")
            try:
                x = [float(t) for t in row[:dim]]
            except ValueError:
                raise MalformedRowError(f"row {i}: unparseable feature in {row[:dim]}") from None
            if not all(math.isfinite(v) for v in x):
                raise NonFiniteFeatureError(f"row {i}: non-finite feature in {row[:dim]}")
            y = _parse_int(row[dim], i, "y")
            z = _parse_int(row[dim + 1], i, "z")
            if schema is not None:
                low = UNLABELED if schema.domain_tag == TARGET else 0
                if not low <= y < schema.num_classes:
                    raise OutOfRangeError(
                        f"row {i}: label {y} outside [{low}, {schema.num_classes - 1}]")
                if not 0 <= z < schema.num_attributes:
                    raise OutOfRangeError(
                        f"row {i}: attribute {z} outside [0, {schema.num_attributes - 1}] "
                        f"(num_attributes={schema.num_attributes})")
            rows_X.append(x)
            rows_y.append(y)
            rows_z.append(z)

    X = np.array(rows_X, dtype=float).reshape(-1, dim)
    y = np.array(rows_y, dtype=np.int64)
    z = np.array(rows_z, dtype=np.int64)
    if schema is None:
        schema = DatasetSchema(dim, int(max(y.max(initial=0), 0)) + 1, int(z.max(initial=0)) + 1,
                               TARGET if (y < 0).any() else None)
    return Dataset(X, y, z, schema.num_classes, schema.num_attributes, schema.domain_tag,
                   schema.attribute_names)


def save_weights(weights, path):
    """Write a weight vector as ``index,weight`` CSV."""
    w = check_weights(weights)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "weight"])
        for i, v in enumerate(w):
            writer.writerow([i, _format_float(v)])


def load_weights(path, n_samples=None):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"weight file not found: {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["index", "weight"]:
            raise MalformedRowError(f"{path}: header must be index,weight")
        values = []
        for i, row in enumerate(reader):
            if not row:
                continue
            if len(row) != 2 or _parse_int(row[0], i, "index") != i:
                raise MalformedRowError(f"row {i}: expected '{i},<weight>'")
            try:
                values.append(float(row[1]))
            except ValueError:
                raise MalformedRowError(f"row {i}: unparseable weight {row[1]!r}") from None
    return check_weights(np.array(values, dtype=float), n_samples)
