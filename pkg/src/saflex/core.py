"""The validation-guided assignment step.

Given the current model, an upstream-augmented batch, and a validation
minibatch, one step does:

1. mean validation cross-entropy gradient g;
2. per augmented sample, class-alignment scores pi via a single logit
   JVP: with u = J(x) g and p the softmax at x, pi_k = p.u - u_k, which
   equals the inner product between g and the gradient of the per-class
   loss -log p_k. Larger pi_k means a descent step on label k lowers the
   validation loss more.
3. soft labels y_i = softmax((pi_i + beta * onehot(orig_i) + gumbel) / tau)
   and binary keep-weights w_i = [pi_i . y_i >= 0], renormalized to sum
   to one (all-zero batches stay zero);
4. one SGD step on mean train cross-entropy plus the weighted soft-label
   cross-entropy of the augmented batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Batch
from .losses import ce_from_logits, ce_grad_logits, one_hot
from .nn import (
    ForwardCache,
    ModelParams,
    ParamGrad,
    jvp_logits_batch,
    mlp_backward,
    mlp_forward,
    sgd_step,
)


@dataclass
class SaflexConfig:
    beta: float = 0.0  # retention bonus added to the original label's score
    tau: float = 0.01  # softmax temperature for the relaxed assignment
    val_batch_size: int | None = None
    seed: int = 0
    gumbel_enabled: bool = True

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")


@dataclass
class SaflexOutput:
    """Per-sample weights and soft labels plus assignment diagnostics.

    weights sum to 1 unless every sample was dropped (then all zero);
    binary_weights are the pre-normalization keep decisions.
    """

    weights: np.ndarray
    soft_labels: np.ndarray
    binary_weights: np.ndarray
    diagnostics: dict[str, float] = field(default_factory=dict)


def validation_gradient(params: ModelParams, val_batch: Batch) -> ParamGrad:
    """Gradient of the mean cross-entropy over the validation minibatch."""
    if val_batch.size == 0:
        raise ValueError("empty validation batch")
    probs, cache = mlp_forward(params, val_batch.X)
    targets = one_hot(val_batch.hard_labels, params.n_classes)
    dlogits = (probs - targets) / val_batch.size
    return mlp_backward(params, cache, dlogits)


def pi_scores(params: ModelParams, x_aug: np.ndarray, g_val: ParamGrad) -> np.ndarray:
    """Per-class alignment scores for each augmented sample, (B, K).

    One batched forward-mode pass along g_val: u = J g_val per sample,
    then pi_k = p.u - u_k. The softmax-weighted mean of each row is zero
    by construction.
    """
    x_aug = np.asarray(x_aug, dtype=np.float64)
    if x_aug.ndim == 1:
        x_aug = x_aug[None, :]
    probs, cache = mlp_forward(params, x_aug)
    u = jvp_logits_batch(params, g_val, cache)
    return (probs * u).sum(axis=1, keepdims=True) - u


def _stable_softmax_rows(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def saflex_assign(
    pi: np.ndarray,
    orig_labels: np.ndarray,
    cfg: SaflexConfig,
    rng: np.random.Generator,
    extra_stats: bool = False,
) -> SaflexOutput:
    """Assign soft labels and keep-weights from alignment scores.

    Score shaping: the original label gets a +beta bonus, so relabeling
    requires another class to win by at least beta; optional Gumbel(0,1)
    noise softens the otherwise near-argmax labels. A sample is kept when
    its scores, averaged under its assigned soft label, are nonnegative;
    kept weights are renormalized to total mass one.

    extra_stats adds the score-sum keep rule's statistics (an alternative
    rule surfaced for diagnostics only, never used for the weights).
    """
    pi = np.asarray(pi, dtype=np.float64)
    if pi.ndim != 2:
        raise ValueError("pi must be (B, K)")
    b, k = pi.shape
    orig_labels = np.asarray(orig_labels, dtype=np.int64)
    if orig_labels.shape != (b,):
        raise ValueError("orig_labels must have one entry per sample")
    scores = pi + cfg.beta * one_hot(orig_labels, k) if cfg.beta != 0.0 else pi
    if cfg.gumbel_enabled:
        scores = scores + rng.gumbel(size=(b, k))
    soft = _stable_softmax_rows(scores / cfg.tau)
    keep = (pi * soft).sum(axis=1) >= 0.0
    binary = keep.astype(np.float64)
    total = binary.sum()
    weights = binary / total if total > 0 else np.zeros(b)
    changed = soft.argmax(axis=1) != orig_labels
    diagnostics = {
        "frac_zero_weight": float(1.0 - total / b),
        "frac_label_changed": float(changed.mean()),
    }
    if extra_stats:
        sum_rule_keep = pi.sum(axis=1) >= 0.0
        diagnostics["frac_keep_sum_rule"] = float(sum_rule_keep.mean())
        diagnostics["weight_rule_agreement"] = float((keep == sum_rule_keep).mean())
    return SaflexOutput(weights, soft, binary, diagnostics)


def saflex_assign_contrastive(
    pi: np.ndarray,
    cfg: SaflexConfig,
    rng: np.random.Generator,
) -> SaflexOutput:
    """Assignment over the B proxy classes of a contrastive batch.

    Sample i's original proxy label is its own index (its paired
    positive), so pi must be (B, B).
    """
    pi = np.asarray(pi, dtype=np.float64)
    if pi.ndim != 2 or pi.shape[0] != pi.shape[1]:
        raise ValueError("contrastive pi must be square (B, B)")
    return saflex_assign(pi, np.arange(pi.shape[0]), cfg, rng)


def closed_form_assignment(
    pi: np.ndarray,
    orig_labels: np.ndarray | None = None,
    beta: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Zero-temperature, noise-free limit of the assignment.

    Labels are the argmax of the shaped scores (lowest index on ties);
    a sample is kept iff its score at the chosen label is nonnegative.
    """
    pi = np.asarray(pi, dtype=np.float64)
    scores = pi
    if orig_labels is not None and beta != 0.0:
        scores = pi + beta * one_hot(np.asarray(orig_labels, dtype=np.int64), pi.shape[1])
    labels = scores.argmax(axis=1)
    kept = pi[np.arange(pi.shape[0]), labels] >= 0.0
    return labels, kept.astype(np.int64)


def combined_step_gradient(
    params: ModelParams,
    train_batch: Batch,
    aug_X: np.ndarray,
    aug_weights: np.ndarray,
    aug_soft_labels: np.ndarray,
) -> tuple[ParamGrad, float]:
    """Gradient of mean train CE plus weighted-sum augmented soft CE.

    The two terms are mixed equally: the train batch contributes unit
    mass through its mean, the augmented batch through weights that the
    assignment already normalized to total mass one.
    """
    probs_tr, cache_tr = mlp_forward(params, train_batch.X)
    targets = one_hot(train_batch.hard_labels, params.n_classes)
    grad = mlp_backward(params, cache_tr, (probs_tr - targets) / train_batch.size)
    train_loss = ce_from_logits(cache_tr.logits, train_batch.hard_labels)
    probs_aug, cache_aug = mlp_forward(params, aug_X)
    dlogits = ce_grad_logits(probs_aug, aug_weights, aug_soft_labels)
    grad = grad.add_scaled(mlp_backward(params, cache_aug, dlogits), 1.0)
    return grad, train_loss


@dataclass
class StepMetrics:
    val_loss_before: float
    val_loss_after: float
    train_loss: float


def _slice_cache(cache: ForwardCache, rows: slice) -> ForwardCache:
    out = ForwardCache(inputs=cache.inputs[rows])
    out.pre_activations = [p[rows] for p in cache.pre_activations]
    out.activations = [a[rows] for a in cache.activations]
    out.logits = cache.logits[rows]
    out.probs = cache.probs[rows]
    return out


def saflex_gradient(
    params: ModelParams,
    train_batch: Batch,
    aug_batch: Batch,
    val_batch: Batch,
    cfg: SaflexConfig,
    rng: np.random.Generator,
) -> tuple[ParamGrad, SaflexOutput, float, float]:
    """Assignment plus combined gradient in one fused stacked pass.

    Returns (gradient, assignment output, train loss, val loss at the
    incoming parameters). Numerically this is the composition of
    validation_gradient, pi_scores, saflex_assign and
    combined_step_gradient, sharing forward passes.
    """
    if train_batch.size == 0 or aug_batch.size == 0 or val_batch.size == 0:
        raise ValueError("all batches must be nonempty")
    k = params.n_classes
    b_tr, b_aug = train_batch.size, aug_batch.size
    stacked = np.concatenate([train_batch.X, aug_batch.X, val_batch.X])
    probs, cache = mlp_forward(params, stacked)
    val_rows = slice(b_tr + b_aug, None)

    val_cache = _slice_cache(cache, val_rows)
    targets_v = one_hot(val_batch.hard_labels, k)
    g_val = mlp_backward(params, val_cache, (val_cache.probs - targets_v) / val_batch.size)
    val_loss = ce_from_logits(val_cache.logits, val_batch.hard_labels)

    aug_cache = _slice_cache(cache, slice(b_tr, b_tr + b_aug))
    u = jvp_logits_batch(params, g_val, aug_cache)
    pi = (aug_cache.probs * u).sum(axis=1, keepdims=True) - u
    out = saflex_assign(pi, aug_batch.hard_labels, cfg, rng)

    # one backward over the whole stack; val rows carry a zero cotangent
    dlogits = np.zeros_like(probs)
    dlogits[:b_tr] = (probs[:b_tr] - one_hot(train_batch.hard_labels, k)) / b_tr
    dlogits[b_tr : b_tr + b_aug] = ce_grad_logits(
        probs[b_tr : b_tr + b_aug], out.weights, out.soft_labels
    )
    grad = mlp_backward(params, cache, dlogits)
    train_loss = ce_from_logits(cache.logits[:b_tr], train_batch.hard_labels)
    return grad, out, train_loss, val_loss


def saflex_step(
    params: ModelParams,
    train_batch: Batch,
    aug_batch: Batch,
    val_batch: Batch,
    alpha: float,
    cfg: SaflexConfig,
    rng: np.random.Generator,
) -> tuple[ModelParams, SaflexOutput, StepMetrics]:
    """One full assignment + SGD update; returns new parameters."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    grad, out, train_loss, before = saflex_gradient(
        params, train_batch, aug_batch, val_batch, cfg, rng
    )
    new_params = sgd_step(params, grad, alpha)
    after = ce_from_logits(mlp_forward(new_params, val_batch.X)[1].logits, val_batch.hard_labels)
    return new_params, out, StepMetrics(before, after, train_loss)
