"""Upstream augmenters producing candidate (features, label) pairs.

All transforms are value-semantic (the input batch is never touched) and
deterministic given their Generator. The label-noise injector exists so
experiments can corrupt augmented labels at a known, controllable rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Batch

KINDS = ("gaussian_jitter", "crop_flip", "mixup", "cutmix_tabular", "label_noise")


@dataclass
class AugmenterSpec:
    """Configuration for one augmentation pipeline.

    `flip_rate` stacks label noise after any base kind; with
    kind="label_noise" only the label noise runs.
    """

    kind: str = "gaussian_jitter"
    sigma: float = 0.5
    pad: int = 2
    mixup_alpha: float = 1.0
    p_replace: float = 0.1
    flip_rate: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown augmenter kind {self.kind!r}")
        if self.sigma < 0 or self.pad < 0 or self.mixup_alpha <= 0:
            raise ValueError("invalid strength parameters")
        for p in (self.p_replace, self.flip_rate):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")


def gaussian_jitter(batch: Batch, sigma: float, rng: np.random.Generator) -> Batch:
    """Add isotropic Gaussian noise to the features; labels are copied."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    noise = sigma * rng.standard_normal(batch.X.shape) if sigma > 0 else 0.0
    return Batch(batch.X + noise, batch.hard_labels.copy(), image_hw=batch.image_hw)


def cutmix_tabular(
    batch: Batch,
    p_replace: float,
    rng: np.random.Generator,
    groups: list[np.ndarray] | None = None,
) -> Batch:
    """Replace each feature with the same feature of a random donor row.

    Replacement is per source feature; a one-hot categorical group moves
    as a unit so every output row stays a valid encoding. The base row's
    label is kept.
    """
    if not 0.0 <= p_replace <= 1.0:
        raise ValueError("p_replace must lie in [0, 1]")
    b = batch.size
    if b < 2 or p_replace == 0.0:
        return Batch(batch.X.copy(), batch.hard_labels.copy(), image_hw=batch.image_hw)
    if groups is None:
        groups = [np.array([j]) for j in range(batch.X.shape[1])]
    X = batch.X.copy()
    for cols in groups:
        take = rng.random(b) < p_replace
        # donors distinct from the base row
        donors = (np.arange(b) + rng.integers(1, b, size=b)) % b
        rows = np.flatnonzero(take)
        if rows.size:
            X[np.ix_(rows, cols)] = batch.X[np.ix_(donors[rows], cols)]
    return Batch(X, batch.hard_labels.copy(), image_hw=batch.image_hw)


def mixup(
    batch: Batch,
    alpha: float,
    rng: np.random.Generator,
    num_classes: int,
    lam: float | None = None,
) -> Batch:
    """Convex-combine each row with a random partner; soft label to match."""
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    lam_val = float(rng.beta(alpha, alpha)) if lam is None else float(lam)
    perm = rng.permutation(batch.size)
    X = lam_val * batch.X + (1.0 - lam_val) * batch.X[perm]
    eye = np.eye(num_classes)
    soft = lam_val * eye[batch.hard_labels] + (1.0 - lam_val) * eye[batch.hard_labels[perm]]
    hard = np.where(lam_val >= 0.5, batch.hard_labels, batch.hard_labels[perm])
    return Batch(X, hard, soft_labels=soft, image_hw=batch.image_hw)


def crop_flip(
    batch: Batch,
    pad: int,
    rng: np.random.Generator,
    flip: bool = True,
) -> Batch:
    """Zero-pad, re-crop at a random offset, and flip horizontally at 0.5."""
    if batch.image_hw is None:
        raise ValueError("crop_flip needs a batch with image_hw metadata")
    h, w = batch.image_hw
    if h != w:
        raise ValueError(f"crop_flip requires square images, got {h}x{w}")
    b = batch.size
    imgs = batch.X.reshape(b, h, w)
    padded = np.pad(imgs, ((0, 0), (pad, pad), (pad, pad)))
    offsets = rng.integers(0, 2 * pad + 1, size=(b, 2)) if pad > 0 else np.zeros(
        (b, 2), dtype=np.int64
    )
    do_flip = rng.random(b) < 0.5 if flip else np.zeros(b, dtype=bool)
    rows = offsets[:, 0, None] + np.arange(h)
    cols = offsets[:, 1, None] + np.arange(w)
    out = padded[np.arange(b)[:, None, None], rows[:, :, None], cols[:, None, :]]
    out[do_flip] = out[do_flip, :, ::-1]
    return Batch(
        out.reshape(b, h * w), batch.hard_labels.copy(), image_hw=batch.image_hw
    )


def label_noise(
    batch: Batch,
    rho: float,
    rng: np.random.Generator,
    num_classes: int,
) -> Batch:
    """Replace each label by a uniformly chosen different class w.p. rho."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    if rho > 0 and num_classes < 2:
        raise ValueError("label noise needs at least two classes")
    labels = batch.hard_labels.copy()
    if rho > 0:
        hit = rng.random(batch.size) < rho
        # uniform over the K-1 other classes
        shift = rng.integers(1, num_classes, size=batch.size)
        labels[hit] = (labels[hit] + shift[hit]) % num_classes
    return Batch(batch.X.copy(), labels, image_hw=batch.image_hw)


def apply_augmenter(
    spec: AugmenterSpec,
    batch: Batch,
    rng: np.random.Generator,
    num_classes: int,
    groups: list[np.ndarray] | None = None,
) -> Batch:
    """Run the configured pipeline: base kind, then optional label noise."""
    if spec.kind == "gaussian_jitter":
        out = gaussian_jitter(batch, spec.sigma, rng)
    elif spec.kind == "crop_flip":
        out = crop_flip(batch, spec.pad, rng)
    elif spec.kind == "mixup":
        out = mixup(batch, spec.mixup_alpha, rng, num_classes)
    elif spec.kind == "cutmix_tabular":
        out = cutmix_tabular(batch, spec.p_replace, rng, groups)
    elif spec.kind == "label_noise":
        return label_noise(batch, spec.flip_rate, rng, num_classes)
    else:  # pragma: no cover - guarded by AugmenterSpec
        raise ValueError(f"unknown augmenter kind {spec.kind!r}")
    if spec.flip_rate > 0:
        out = label_noise(out, spec.flip_rate, rng, num_classes)
    return out
