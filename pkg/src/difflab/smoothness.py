"""Entropy of teacher soft targets, averaged soft-output profiles and dominance."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import BracketError, ContractError, MonotonicityError
from .nn import NetworkParams, logits
from .objectives import SoftDistribution, softmax

ZERO_PROB = 1e-300


@dataclass
class SoftOutputProfile:
    class_of_interest: int
    mean_probs: np.ndarray
    temperature: float

    @property
    def gap(self) -> float:
        """``p[k*]`` minus the largest incorrect-class probability."""
        return float(self.mean_probs[self.class_of_interest] - self.mean_probs[self.runner_up])

    @property
    def runner_up(self) -> int:
        p = self.mean_probs.copy()
        p[self.class_of_interest] = -np.inf
        return int(np.argmax(p))


def _row_entropy(p: np.ndarray) -> np.ndarray:
    safe = np.where(p > ZERO_PROB, p, 1.0)
    return -np.sum(np.where(p > ZERO_PROB, p * np.log(safe), 0.0), axis=-1)


def entropy(dist) -> float:
    p = dist.probs if isinstance(dist, SoftDistribution) else np.asarray(dist, dtype=np.float64)
    return float(_row_entropy(p))


def average_entropy(teacher: NetworkParams, data, temperature: float) -> float:
    """Mean entropy of the teacher's tempered outputs over ``data``."""
    if len(data) == 0:
        raise ContractError("empty dataset")
    ent = _row_entropy(softmax(logits(teacher, data.inputs), temperature))
    return math.fsum(ent) / len(ent)


def entropy_matched_temperature(teacher: NetworkParams, data, target_entropy: float,
                                bracket: tuple[float, float] = (1.0, 64.0),
                                tol: float = 1e-6, max_iter: int = 200) -> float:
    """Bisect for the temperature whose average entropy equals ``target_entropy``."""
    lo, hi = float(bracket[0]), float(bracket[1])
    if not 0 < lo < hi:
        raise BracketError(f"invalid bracket {bracket}")
    z = logits(teacher, data.inputs)

    def f(t):
        return math.fsum(_row_entropy(softmax(z, t))) / len(z)

    f_lo, f_hi = f(lo), f(hi)
    if f_lo > f_hi:
        raise MonotonicityError(
            f"average entropy decreases over the bracket: H({lo})={f_lo} > H({hi})={f_hi}")
    if not f_lo - tol <= target_entropy <= f_hi + tol:
        raise BracketError(
            f"target entropy {target_entropy} outside [{f_lo}, {f_hi}] on bracket ({lo}, {hi})")
    if abs(f_lo - target_entropy) < tol:
        return lo
    if abs(f_hi - target_entropy) < tol:
        return hi
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm - target_entropy) < tol:
            break
        if fm < target_entropy:
            lo = mid
        else:
            hi = mid
    return mid


def soft_output_profile(teacher: NetworkParams, data, k_star: int,
                        temperature: float) -> SoftOutputProfile:
    mask = data.labels == k_star
    if not mask.any():
        raise ContractError(f"class {k_star} has no samples")
    probs = softmax(logits(teacher, data.inputs[mask]), temperature)
    return SoftOutputProfile(k_star, probs.mean(axis=0), float(temperature))


def dominance_count(profile: SoftOutputProfile, factor: float = 100.0) -> int:
    """Incorrect classes at least ``factor`` times less likely than the runner-up."""
    p = profile.mean_probs
    if p.size < 3:
        raise ContractError("dominance needs at least three classes")
    ml = profile.runner_up
    p2 = p[ml]
    return sum(1 for m in range(p.size)
               if m not in (profile.class_of_interest, ml) and p2 >= factor * p[m])


def write_smoothness_csv(rows, path) -> None:
    """``rows`` are ``(temperature, alpha, average_entropy)`` triples."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["temperature", "alpha", "average_entropy"])
        for t, a, h in rows:
            w.writerow([repr(float(t)), repr(float(a)), repr(float(h))])


def write_profile_csv(profile: SoftOutputProfile, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class_index", "mean_prob"])
        for k, p in enumerate(profile.mean_probs):
            w.writerow([k, repr(float(p))])
