"""Datasets: synthetic 2-D tasks, schema'd CSV, raw images, and splits.

A Dataset holds a dense float64 feature matrix with categorical columns
one-hot expanded, integer labels in [0, K), and the feature-group
metadata needed to map processed columns back to the original schema.
Datasets are frozen after construction and safe to share.
"""

from __future__ import annotations

import csv
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .rng import stream

IMAGE_MAGIC = b"SFIM1"

_KINDS = ("continuous", "categorical", "label")


@dataclass
class FeatureGroup:
    """One source column and where it landed in the processed matrix."""

    name: str
    kind: str  # continuous | categorical
    start: int
    width: int
    categories: list[str] | None = None


@dataclass
class Batch:
    """A minibatch: features, hard labels, optional soft labels / weights."""

    X: np.ndarray
    hard_labels: np.ndarray
    soft_labels: np.ndarray | None = None
    weights: np.ndarray | None = None
    image_hw: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=np.float64)
        self.hard_labels = np.asarray(self.hard_labels, dtype=np.int64)
        if self.X.ndim != 2 or self.hard_labels.shape != (self.X.shape[0],):
            raise ValueError("batch features must be (B, d) with one label per row")
        if self.soft_labels is not None:
            self.soft_labels = np.asarray(self.soft_labels, dtype=np.float64)
            if self.soft_labels.shape[0] != self.X.shape[0]:
                raise ValueError("soft labels must have one row per sample")
            if np.any(self.soft_labels < -1e-9):
                raise ValueError("soft labels must be nonnegative")
            if np.any(np.abs(self.soft_labels.sum(axis=1) - 1.0) > 1e-9):
                raise ValueError("soft label rows must sum to 1")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=np.float64)
            if self.weights.shape != (self.X.shape[0],):
                raise ValueError("weights must have one entry per sample")
            if np.any(self.weights < 0) or np.any(self.weights > 1):
                raise ValueError("weights must lie in [0, 1]")

    @property
    def size(self) -> int:
        return self.X.shape[0]


@dataclass
class SplitSpec:
    train: float = 0.6
    val: float = 0.2
    test: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        fracs = (self.train, self.val, self.test)
        if any(f < 0 for f in fracs) or all(f == 0 for f in fracs):
            raise ValueError("split fractions must be nonnegative, not all zero")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {sum(fracs)}")


@dataclass
class Dataset:
    X: np.ndarray
    labels: np.ndarray
    num_classes: int
    groups: list[FeatureGroup] = field(default_factory=list)
    label_values: list[str] | None = None
    image_hw: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.X.ndim != 2 or self.labels.shape != (self.X.shape[0],):
            raise ValueError("X must be (n, d) with one label per row")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        if not self.groups:
            self.groups = [
                FeatureGroup(f"x{j}", "continuous", j, 1) for j in range(self.X.shape[1])
            ]
        self.X.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def size(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def batch(self, indices: np.ndarray) -> Batch:
        idx = np.asarray(indices, dtype=np.int64)
        return Batch(self.X[idx], self.labels[idx], image_hw=self.image_hw)

    def subset(self, indices: np.ndarray) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.X[idx], self.labels[idx], self.num_classes,
            self.groups, self.label_values, self.image_hw,
        )

    def group_slices(self) -> list[np.ndarray]:
        """Column indices of each source feature, for group-wise transforms."""
        return [np.arange(g.start, g.start + g.width) for g in self.groups]


def gen_two_gaussians(
    n: int,
    means: tuple[tuple[float, float], tuple[float, float]] = ((1.0, 1.0), (-1.0, -1.0)),
    sigma: float = 1.0,
    seed: int = 0,
) -> Dataset:
    """Balanced binary 2-D task: class c drawn from N(mean_c, sigma^2 I)."""
    if n < 2:
        raise ValueError("need n >= 2")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    rng = stream(seed, "two_gaussians")
    n0 = n // 2
    counts = (n0, n - n0)
    mu = np.asarray(means, dtype=np.float64)
    xs, ys = [], []
    for c, cnt in enumerate(counts):
        xs.append(mu[c] + sigma * rng.standard_normal((cnt, 2)))
        ys.append(np.full(cnt, c, dtype=np.int64))
    X = np.concatenate(xs)
    y = np.concatenate(ys)
    order = rng.permutation(n)
    return Dataset(X[order], y[order], 2)


def gen_two_moons(n: int, noise: float = 0.1, seed: int = 0) -> Dataset:
    """Two interleaved half circles with Gaussian noise."""
    if n < 2:
        raise ValueError("need n >= 2")
    rng = stream(seed, "two_moons")
    n0 = n // 2
    n1 = n - n0
    t0 = np.pi * rng.random(n0)
    t1 = np.pi * rng.random(n1)
    outer = np.stack([np.cos(t0), np.sin(t0)], axis=1)
    inner = np.stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)], axis=1)
    X = np.concatenate([outer, inner]) + noise * rng.standard_normal((n, 2))
    y = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    order = rng.permutation(n)
    return Dataset(X[order], y[order], 2)


# ---------------------------------------------------------------------------
# CSV + schema

def read_schema(schema_path: str) -> list[tuple[str, str, int | None]]:
    """Schema file: one `name,kind[,cardinality]` line per column."""
    out = []
    with open(schema_path, newline="") as f:
        for ln, row in enumerate(csv.reader(f), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) not in (2, 3):
                raise ValueError(f"{schema_path}:{ln}: expected name,kind[,cardinality]")
            name, kind = row[0].strip(), row[1].strip()
            if kind not in _KINDS:
                raise ValueError(f"{schema_path}:{ln}: unknown kind {kind!r}")
            card = int(row[2]) if len(row) == 3 else None
            out.append((name, kind, card))
    if sum(1 for _, kind, _ in out if kind == "label") != 1:
        raise ValueError(f"{schema_path}: schema must declare exactly one label column")
    return out


def write_schema(schema: list[tuple[str, str, int | None]], schema_path: str) -> None:
    with open(schema_path, "w", newline="") as f:
        w = csv.writer(f)
        for name, kind, card in schema:
            w.writerow([name, kind] if card is None else [name, kind, card])


def load_csv(path: str, schema_path: str, standardize: bool = True) -> Dataset:
    """Load a header'd CSV against a schema.

    Continuous columns are z-scored over the file (idempotent: already
    standardized data passes through unchanged); categorical columns are
    one-hot expanded over their sorted observed values.
    """
    schema = read_schema(schema_path)
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    header = [h.strip() for h in header]
    expected = [name for name, _, _ in schema]
    if header != expected:
        missing = [c for c in expected if c not in header]
        if missing:
            raise ValueError(f"{path}: missing columns {missing} required by schema")
        raise ValueError(f"{path}: header {header} does not match schema order {expected}")

    cols = {name: [r[j].strip() for r in rows] for j, name in enumerate(header)}
    n = len(rows)
    blocks: list[np.ndarray] = []
    groups: list[FeatureGroup] = []
    labels = None
    label_values: list[str] | None = None
    start = 0
    for name, kind, card in schema:
        raw = cols[name]
        if kind == "label":
            label_values = sorted(set(raw))
            lut = {v: i for i, v in enumerate(label_values)}
            labels = np.array([lut[v] for v in raw], dtype=np.int64)
            continue
        if kind == "continuous":
            try:
                x = np.array([float(v) for v in raw], dtype=np.float64)
            except ValueError as exc:
                raise ValueError(f"{path}: non-numeric value in column {name!r}") from exc
            if standardize:
                sd = x.std()
                x = (x - x.mean()) / (sd if sd > 0 else 1.0)
            blocks.append(x[:, None])
            groups.append(FeatureGroup(name, "continuous", start, 1))
            start += 1
        else:
            values = sorted(set(raw))
            if card is not None and len(values) > card:
                extra = [v for v in values][card:]
                raise ValueError(
                    f"{path}: column {name!r} has unknown category {extra[0]!r} "
                    f"(cardinality {card}, saw {len(values)} values)"
                )
            lut = {v: i for i, v in enumerate(values)}
            width = card if card is not None else len(values)
            block = np.zeros((n, width))
            block[np.arange(n), [lut[v] for v in raw]] = 1.0
            blocks.append(block)
            groups.append(FeatureGroup(name, "categorical", start, width, values))
            start += width
    if labels is None or label_values is None:
        raise ValueError(f"{schema_path}: no label column")
    X = np.concatenate(blocks, axis=1) if blocks else np.zeros((n, 0))
    return Dataset(X, labels, len(label_values), groups, label_values)


def save_csv(ds: Dataset, path: str, schema_path: str) -> None:
    """Write a Dataset back to CSV + schema (categoricals from their argmax)."""
    schema: list[tuple[str, str, int | None]] = []
    names = []
    columns: list[list[str]] = []
    for g in ds.groups:
        names.append(g.name)
        if g.kind == "continuous":
            schema.append((g.name, "continuous", None))
            columns.append([repr(float(v)) for v in ds.X[:, g.start]])
        else:
            cats = g.categories or [str(i) for i in range(g.width)]
            schema.append((g.name, "categorical", g.width))
            hot = ds.X[:, g.start : g.start + g.width].argmax(axis=1)
            columns.append([cats[i] for i in hot])
    names.append("label")
    schema.append(("label", "label", None))
    lv = ds.label_values or [str(i) for i in range(ds.num_classes)]
    columns.append([lv[i] for i in ds.labels])
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(names)
        for i in range(ds.size):
            w.writerow([col[i] for col in columns])
    write_schema(schema, schema_path)


# ---------------------------------------------------------------------------
# Raw images

def save_images_raw(pixels: np.ndarray, labels: np.ndarray, num_classes: int, path: str) -> None:
    """pixels: (n, h, w) uint8; little-endian header then pixels then labels."""
    pixels = np.asarray(pixels, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, h, w = pixels.shape
    with open(path, "wb") as f:
        f.write(IMAGE_MAGIC)
        f.write(struct.pack("<IIII", n, h, w, num_classes))
        f.write(pixels.tobytes())
        f.write(labels.tobytes())


def load_images_raw(path: str) -> Dataset:
    """Load the raw image format; pixels scaled to [0, 1] and flattened."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[: len(IMAGE_MAGIC)] != IMAGE_MAGIC:
        raise ValueError(f"not an image file: bad magic in {path!r}")
    off = len(IMAGE_MAGIC)
    n, h, w, k = struct.unpack_from("<IIII", blob, off)
    off += 16
    expected = off + n * h * w + n
    if len(blob) != expected:
        raise ValueError(f"truncated image file: expected {expected} bytes, got {len(blob)}")
    pixels = np.frombuffer(blob, dtype=np.uint8, count=n * h * w, offset=off)
    labels = np.frombuffer(blob, dtype=np.uint8, count=n, offset=off + n * h * w)
    X = pixels.reshape(n, h * w).astype(np.float64) / 255.0
    return Dataset(X, labels.astype(np.int64), k, image_hw=(h, w))


# ---------------------------------------------------------------------------
# Splitting + normalization

def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Disjoint, exhaustive, seed-deterministic, label-stratified partition."""
    rng = stream(spec.seed, "split")
    fracs = np.array([spec.train, spec.val, spec.test])
    buckets: list[list[int]] = [[], [], []]
    for c in range(ds.num_classes):
        idx = np.flatnonzero(ds.labels == c)
        idx = idx[rng.permutation(idx.size)]
        # largest-remainder apportionment per class
        quota = fracs * idx.size
        base = np.floor(quota).astype(int)
        rem = idx.size - base.sum()
        order = np.argsort(-(quota - base), kind="stable")
        for j in order[:rem]:
            base[j] += 1
        pos = 0
        for s in range(3):
            buckets[s].extend(idx[pos : pos + base[s]].tolist())
            pos += base[s]
    # guarantee nonzero splits receive at least one sample
    sizes = [len(b) for b in buckets]
    for s in range(3):
        if fracs[s] > 0 and sizes[s] == 0:
            donor = int(np.argmax(sizes))
            buckets[s].append(buckets[donor].pop())
            sizes = [len(b) for b in buckets]
    parts = []
    for s in range(3):
        idx = np.sort(np.array(buckets[s], dtype=np.int64))
        part = ds.subset(idx)
        if fracs[s] > 0 and part.size:
            present = np.unique(part.labels)
            if present.size < ds.num_classes:
                warnings.warn(
                    f"split {('train', 'val', 'test')[s]} is missing "
                    f"{ds.num_classes - present.size} class(es)",
                    stacklevel=2,
                )
        parts.append(part)
    return parts[0], parts[1], parts[2]


def apply_train_statistics(train: Dataset, *others: Dataset) -> tuple[Dataset, ...]:
    """Re-standardize continuous columns using the training split only."""
    cont = [g.start for g in train.groups if g.kind == "continuous"]
    if not cont:
        return (train, *others)
    mean = train.X[:, cont].mean(axis=0)
    sd = train.X[:, cont].std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    out = []
    for ds in (train, *others):
        X = ds.X.copy()
        X[:, cont] = (X[:, cont] - mean) / sd
        out.append(Dataset(X, ds.labels, ds.num_classes, ds.groups, ds.label_values, ds.image_hw))
    return tuple(out)
