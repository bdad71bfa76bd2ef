"""Synthetic generators, CSV ingestion and labeled/held-out role assignment."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from pathlib import Path

import numpy as np

from graphrep.errors import InvalidConfigError, ParseError, ValidationError

UNKNOWN = -1


class Role(IntEnum):
    SEED = 0
    VALIDATION = 1
    TEST = 2


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray  # class index, or UNKNOWN
    roles: np.ndarray  # Role values
    n_classes: int
    class_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.roles = np.asarray(self.roles, dtype=np.int8)
        if not self.class_names:
            width = len(str(max(self.n_classes - 1, 0)))
            # zero padding keeps lexicographic order equal to numeric order
            self.class_names = [str(c).zfill(width) for c in range(self.n_classes)]
        n = self.X.shape[0]
        if self.X.ndim != 2 or self.y.shape != (n,) or self.roles.shape != (n,):
            raise ValidationError("X, y and roles must agree on the number of points")
        if not np.all(np.isfinite(self.X)):
            raise ValidationError("features contain non-finite values")
        labeled = self.roles != Role.TEST
        if np.any(self.y[labeled] == UNKNOWN):
            raise ValidationError("seed/validation points must have known labels")
        if np.any((self.y < UNKNOWN) | (self.y >= self.n_classes)):
            raise ValidationError("labels out of range")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def indices(self, role: Role) -> np.ndarray:
        return np.flatnonzero(self.roles == role)

    def seed_matrix(self) -> np.ndarray:
        """One-hot rows for seeds, zeros elsewhere (the propagation input)."""
        Y0 = np.zeros((self.n, self.n_classes))
        seeds = self.indices(Role.SEED)
        Y0[seeds, self.y[seeds]] = 1.0
        return Y0


def gen_two_moons(n, noise_sd=0.1, nuisance_dims=0, nuisance_sd=1.0, seed=0) -> Dataset:
    if n <= 0 or n % 2:
        raise InvalidConfigError(f"two moons needs a positive even n, got {n}")
    if noise_sd < 0 or nuisance_sd < 0 or nuisance_dims < 0:
        raise InvalidConfigError("noise levels and nuisance_dims must be non-negative")
    rng = np.random.default_rng(seed)
    half = n // 2
    t = rng.uniform(0.0, np.pi, size=n)
    upper = np.column_stack([np.cos(t[:half]), np.sin(t[:half])])
    lower = np.column_stack([1.0 - np.cos(t[half:]), 0.5 - np.sin(t[half:])])
    informative = np.vstack([upper, lower]) + rng.normal(0.0, noise_sd, size=(n, 2))
    nuisance = rng.normal(0.0, nuisance_sd, size=(n, nuisance_dims))
    X = np.hstack([informative, nuisance])
    y = np.repeat([0, 1], half)
    return Dataset(X, y, np.full(n, Role.SEED), 2)


def gen_blobs(n_per_class, c, d, informative_dims, separation, noise_sd, seed=0) -> Dataset:
    """Class k centered at ``separation * e_k`` inside the informative block."""
    if c < 2 or n_per_class < 1:
        raise InvalidConfigError("need c >= 2 classes with at least one point each")
    if not c <= informative_dims <= d:
        raise InvalidConfigError(f"need c <= informative_dims <= d, got {c}, {informative_dims}, {d}")
    if noise_sd < 0:
        raise InvalidConfigError("noise_sd must be non-negative")
    rng = np.random.default_rng(seed)
    means = np.zeros((c, d))
    means[np.arange(c), np.arange(c)] = separation
    y = np.repeat(np.arange(c), n_per_class)
    X = means[y] + rng.normal(0.0, noise_sd, size=(y.size, d))
    return Dataset(X, y, np.full(y.size, Role.SEED), c)


def split_labels(ds: Dataset, labeled_per_class, val_fraction, seed=0) -> Dataset:
    if not 0 < val_fraction < 1:
        raise InvalidConfigError(f"val_fraction must lie in (0, 1), got {val_fraction}")
    n_val = math.ceil(val_fraction * labeled_per_class)
    if n_val < 1 or labeled_per_class - n_val < 1:
        raise InvalidConfigError(
            f"labeled_per_class={labeled_per_class}, val_fraction={val_fraction} "
            "leaves no seed or no validation point per class"
        )
    rng = np.random.default_rng(seed)
    roles = np.full(ds.n, Role.TEST, dtype=np.int8)
    for cls in range(ds.n_classes):
        members = np.flatnonzero(ds.y == cls)
        if members.size < labeled_per_class:
            raise InvalidConfigError(
                f"class {ds.class_names[cls]!r} has {members.size} labeled points, "
                f"need {labeled_per_class}"
            )
        picked = rng.choice(members, size=labeled_per_class, replace=False)
        roles[picked[:n_val]] = Role.VALIDATION
        roles[picked[n_val:]] = Role.SEED
    return replace(ds, roles=roles)


def dataset_to_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"f{j}" for j in range(ds.X.shape[1])] + ["label"])
    for row, label in zip(ds.X, ds.y):
        token = "?" if label == UNKNOWN else ds.class_names[label]
        writer.writerow([repr(float(v)) for v in row] + [token])
    return buf.getvalue()


def save_csv(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dataset_to_csv(ds))


def parse_csv(text: str) -> Dataset:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ParseError(1, "empty file")
    header = rows[0]
    d = len(header) - 1
    if d < 1 or header[-1] != "label" or header[:-1] != [f"f{j}" for j in range(d)]:
        raise ParseError(1, "header must be f0,...,f{d-1},label")
    feats, tokens = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            raise ParseError(lineno, "blank line")
        if len(row) != d + 1:
            raise ParseError(lineno, f"expected {d + 1} fields, found {len(row)}")
        try:
            values = [float(v) for v in row[:d]]
        except ValueError as exc:
            raise ParseError(lineno, f"non-numeric feature: {exc}") from None
        if not all(math.isfinite(v) for v in values):
            raise ParseError(lineno, "non-finite feature")
        token = row[d].strip()
        if not token:
            raise ParseError(lineno, "empty label token")
        feats.append(values)
        tokens.append(token)
    names = sorted({t for t in tokens if t != "?"})
    index = {name: i for i, name in enumerate(names)}
    y = np.array([index.get(t, UNKNOWN) if t != "?" else UNKNOWN for t in tokens], dtype=np.int64)
    roles = np.where(y == UNKNOWN, Role.TEST, Role.SEED)
    X = np.array(feats, dtype=np.float64).reshape(len(feats), d)
    return Dataset(X, y, roles, len(names), names)


def load_csv(path) -> Dataset:
    return parse_csv(Path(path).read_text(encoding="utf-8"))
