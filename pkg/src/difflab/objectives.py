"""Label-smoothed targets, tempered softmax and the distillation objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DomainError, ShapeError

PROB_FLOOR = 1e-300


@dataclass(frozen=True)
class SmoothingConfig:
    alpha: float
    num_classes: int

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise DomainError(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.num_classes < 1:
            raise DomainError("num_classes must be positive")


@dataclass(frozen=True)
class DistillConfig:
    temperature: float
    beta: float = 1.0

    def __post_init__(self):
        if not self.temperature > 0:
            raise DomainError(f"temperature must be positive, got {self.temperature}")
        if not 0 <= self.beta <= 1:
            raise DomainError(f"beta must lie in [0, 1], got {self.beta}")


@dataclass(frozen=True, eq=False)
class SoftDistribution:
    probs: np.ndarray
    temperature: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", p)
        if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise DomainError("probs must be a non-negative vector summing to 1")
        if not self.temperature > 0:
            raise DomainError("temperature must be positive")

    def __len__(self):
        return self.probs.size


def ls_targets(label: int, cfg: SmoothingConfig) -> SoftDistribution:
    return SoftDistribution(ls_target_matrix(np.array([label]), cfg.alpha, cfg.num_classes)[0])


def ls_target_matrix(labels: np.ndarray, alpha: float, num_classes: int) -> np.ndarray:
    """One smoothed target row per label: ``(1-alpha)*onehot + alpha/K``."""
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise IndexError(f"label out of range for K={num_classes}")
    off = alpha / num_classes
    out = np.full((labels.size, num_classes), off)
    out[np.arange(labels.size), labels] = (1.0 - alpha) + off
    return out


def softmax(logits: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Row-wise tempered softmax over the last axis (max-shifted)."""
    if not temperature > 0:
        raise DomainError(f"temperature must be positive, got {temperature}")
    z = np.asarray(logits, dtype=np.float64) / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def tempered_softmax(logits: np.ndarray, temperature: float) -> SoftDistribution:
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1:
        raise ShapeError("tempered_softmax takes a single logit vector")
    if not np.all(np.isfinite(logits)):
        raise DomainError("logits must be finite")
    return SoftDistribution(softmax(logits, temperature), float(temperature))


def _probs(d) -> np.ndarray:
    return d.probs if isinstance(d, SoftDistribution) else np.asarray(d, dtype=np.float64)


def cross_entropy(target, pred) -> float:
    """``H(target, pred) = -sum target * log pred`` with pred clamped at 1e-300."""
    t, p = _probs(target), _probs(pred)
    if t.shape != p.shape:
        raise ShapeError(f"length mismatch: {t.shape} vs {p.shape}")
    return float(-np.sum(t * np.log(np.maximum(p, PROB_FLOOR))))


def _log_softmax(logits, temperature):
    z = np.asarray(logits, dtype=np.float64) / temperature
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _check_teacher(teacher: SoftDistribution, cfg: DistillConfig, k: int):
    if teacher.temperature != cfg.temperature:
        raise ConsistencyError(
            f"teacher produced at T={teacher.temperature}, config uses T={cfg.temperature}")
    if teacher.probs.size != k:
        raise ShapeError("teacher and student class counts differ")


def kd_loss(student_logits, teacher_probs_T: SoftDistribution, hard_label: int,
            cfg: DistillConfig) -> float:
    """``(1-beta) H(y, p) + beta T^2 H(p_teacher(T), p(T))`` with one-hot ``y``."""
    z = np.asarray(student_logits, dtype=np.float64)
    _check_teacher(teacher_probs_T, cfg, z.size)
    t = cfg.temperature
    soft = -np.sum(teacher_probs_T.probs * _log_softmax(z, t))
    hard = -_log_softmax(z, 1.0)[hard_label] if cfg.beta < 1 else 0.0
    return float((1 - cfg.beta) * hard + cfg.beta * t * t * soft)


def kd_loss_grad(student_logits, teacher_probs_T: SoftDistribution, hard_label: int,
                 cfg: DistillConfig) -> np.ndarray:
    z = np.asarray(student_logits, dtype=np.float64)
    _check_teacher(teacher_probs_T, cfg, z.size)
    t = cfg.temperature
    grad = cfg.beta * t * (softmax(z, t) - teacher_probs_T.probs)
    if cfg.beta < 1:
        hard = softmax(z, 1.0)
        hard[hard_label] -= 1.0
        grad = grad + (1 - cfg.beta) * hard
    return grad


class SmoothedCrossEntropy:
    """Batch objective ``mean_i H(y_ls_i, softmax(z_i))`` over a labelled set."""

    def __init__(self, labels: np.ndarray, num_classes: int, alpha: float):
        SmoothingConfig(alpha, num_classes)
        self.targets = ls_target_matrix(labels, alpha, num_classes)

    def __call__(self, logits: np.ndarray, idx: np.ndarray):
        y = self.targets[idx]
        logp = _log_softmax(logits, 1.0)
        b = logits.shape[0]
        loss = -np.sum(y * logp) / b
        return float(loss), (np.exp(logp) - y) / b


class DistillationLoss:
    """Batch distillation objective against precomputed teacher outputs.

    ``teacher_probs`` holds one row per training sample, produced by the
    teacher at ``cfg.temperature``.
    """

    def __init__(self, teacher_probs: np.ndarray, labels: np.ndarray, cfg: DistillConfig):
        self.teacher = np.asarray(teacher_probs, dtype=np.float64)
        self.labels = np.asarray(labels)
        self.cfg = cfg

    def __call__(self, logits: np.ndarray, idx: np.ndarray):
        t, beta = self.cfg.temperature, self.cfg.beta
        b = logits.shape[0]
        pt = self.teacher[idx]
        logp_t = _log_softmax(logits, t)
        loss = beta * t * t * -np.sum(pt * logp_t) / b
        grad = beta * t * (np.exp(logp_t) - pt)
        if beta < 1:
            logp = _log_softmax(logits, 1.0)
            rows = np.arange(b)
            y = self.labels[idx]
            loss += (1 - beta) * -np.sum(logp[rows, y]) / b
            hard = np.exp(logp)
            hard[rows, y] -= 1.0
            grad = grad + (1 - beta) * hard
        return float(loss), grad / b
