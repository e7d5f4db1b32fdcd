"""Numerical checks for cross-entropy separation under class-flip label noise.

When labels are resampled uniformly among the wrong classes with probability
`flip_rate`, and a probability model stays within a KL budget of the noisy
label distribution, the cross-entropy of the model against a correct label
stays below -log(1 - flip_rate - slack) while the cross-entropy against any
incorrect label stays above -log(slack + flip_rate / (C - 1)), except on a
set of inputs of probability at most 2 * kl_budget / slack**2.  This module
evaluates those thresholds exactly and measures the exception rates by
simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincinv

from .errors import InputError
from .rng import derive_rng

_SUBSAMPLE = 2000
_BISECT_STEPS = 80


@dataclass(frozen=True)
class FlipNoiseModel:
    """Symmetric label-flip noise plus a learner accuracy budget.

    A flipped label is uniform over the other num_classes - 1 classes.
    `slack` is the tolerance carved out of both loss thresholds and
    `kl_budget` caps the mean KL divergence from the noisy label
    distribution to the learned one.
    """

    num_classes: int
    flip_rate: float
    slack: float
    kl_budget: float

    def __post_init__(self):
        if self.num_classes < 2:
            raise InputError("num_classes must be >= 2")
        if not 0.0 <= self.flip_rate < 1.0:
            raise InputError("flip_rate must be in [0, 1)")
        if self.slack <= 0:
            raise InputError("slack must be positive")
        if self.kl_budget < 0:
            raise InputError("kl_budget must be >= 0")

    @property
    def valid(self) -> bool:
        """True when the two loss thresholds are strictly separated."""
        c = self.num_classes
        return self.flip_rate < (c - 1) / c * (1.0 - 2.0 * self.slack)

    def label_distribution(self) -> np.ndarray:
        """Noisy label distribution with the true class in slot zero."""
        c = self.num_classes
        probs = np.full(c, self.flip_rate / (c - 1))
        probs[0] = 1.0 - self.flip_rate
        return probs


@dataclass(frozen=True)
class SeparationThresholds:
    lower: float  # correct-label losses stay below this
    upper: float  # incorrect-label losses stay above this
    valid: bool

    @property
    def width(self) -> float:
        return self.upper - self.lower


def separation_thresholds(model: FlipNoiseModel) -> SeparationThresholds:
    """Loss thresholds -log(1 - flip_rate - slack) and
    -log(slack + flip_rate / (C - 1)); separation holds iff lower < upper."""
    inner = 1.0 - model.flip_rate - model.slack
    if inner <= 0:
        raise InputError(
            "flip_rate + slack must stay below 1 for the lower threshold to exist"
        )
    lower = -math.log(inner)
    upper = -math.log(model.slack + model.flip_rate / (model.num_classes - 1))
    return SeparationThresholds(lower=lower, upper=upper, valid=lower < upper)


@dataclass(frozen=True)
class PinskerResult:
    tv: float
    kl: float
    holds: bool


def pinsker_check(p, q) -> PinskerResult:
    """Total variation versus the KL-based bound sqrt(2 * KL(p || q)).

    A zero in q where p has mass makes the divergence infinite and the
    bound trivially true.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1 or p.size < 2:
        raise InputError("p and q must be equal-length vectors of size >= 2")
    for name, vec in (("p", p), ("q", q)):
        if np.any(vec < -1e-12) or abs(float(vec.sum()) - 1.0) > 1e-9:
            raise InputError(f"{name} is not a probability distribution")
    tv = 0.5 * float(np.abs(p - q).sum())
    mask = p > 0
    if np.any(q[mask] == 0):
        kl = math.inf
    else:
        kl = float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))
        kl = max(kl, 0.0)
    return PinskerResult(tv=tv, kl=kl, holds=tv <= math.sqrt(2.0 * kl))


@dataclass(frozen=True)
class SeparationReport:
    model: FlipNoiseModel
    thresholds: SeparationThresholds | None
    n_samples: int
    seed: int
    ran: bool
    concentration: float | None = None
    mean_kl: float | None = None
    violation_rate_correct: float | None = None
    violation_rate_incorrect: float | None = None

    @property
    def bound(self) -> float:
        return 2.0 * self.model.kl_budget / self.model.slack**2

    def to_dict(self) -> dict:
        return {
            "num_classes": self.model.num_classes,
            "flip_rate": self.model.flip_rate,
            "slack": self.model.slack,
            "kl_budget": self.model.kl_budget,
            "valid": self.model.valid,
            "ran": self.ran,
            "lower": self.thresholds.lower if self.thresholds else None,
            "upper": self.thresholds.upper if self.thresholds else None,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "concentration": self.concentration,
            "mean_kl": self.mean_kl,
            "violation_rate_correct": self.violation_rate_correct,
            "violation_rate_incorrect": self.violation_rate_incorrect,
            "bound": self.bound,
        }


def _perturbed(probs: np.ndarray, uniforms: np.ndarray, concentration: float) -> np.ndarray:
    """Dirichlet(concentration * probs) draws pushed through fixed uniforms.

    Reusing the same uniforms at every concentration makes each sample path
    continuous in the concentration, so a bisection on the mean divergence
    is stable.  Zero-mass slots stay exactly zero.
    """
    alphas = concentration * probs
    gammas = np.zeros_like(uniforms)
    mask = alphas > 0
    if np.any(mask):
        gammas[:, mask] = gammaincinv(alphas[mask], uniforms[:, mask])
    totals = gammas.sum(axis=1, keepdims=True)
    totals[totals == 0] = 1.0
    return gammas / totals


def _mean_kl(probs: np.ndarray, estimates: np.ndarray) -> float:
    mask = probs > 0
    p = probs[mask]
    with np.errstate(divide="ignore"):
        logs = np.log(p) - np.log(estimates[:, mask])
    return float(np.mean(np.sum(p * logs, axis=1)))


def _fit_concentration(probs: np.ndarray, uniforms: np.ndarray, target: float) -> float:
    """Largest-KL concentration whose mean divergence still meets the target."""
    sub = uniforms[: min(_SUBSAMPLE, len(uniforms))]

    def kl_at(t: float) -> float:
        return _mean_kl(probs, _perturbed(probs, sub, t))

    lo = hi = 1.0
    for _ in range(60):
        if kl_at(hi) <= target:
            break
        hi *= 4.0
    else:
        raise InputError("could not reach the divergence budget; widen it")
    while kl_at(lo) <= target and lo > 1e-9:
        lo /= 4.0
    for _ in range(_BISECT_STEPS):
        mid = math.sqrt(lo * hi)
        if kl_at(mid) <= target:
            hi = mid
        else:
            lo = mid
    t = hi
    # The subsample fit can overshoot slightly on the full set; back off.
    for _ in range(200):
        if _mean_kl(probs, _perturbed(probs, uniforms, t)) <= target:
            return t
        t *= 1.1
    raise InputError("could not reach the divergence budget; widen it")


def separation_experiment(
    model: FlipNoiseModel, n_samples: int, seed: int = 0
) -> SeparationReport:
    """Measure how often simulated losses cross their thresholds.

    Each sample perturbs the noisy label distribution with a Dirichlet draw
    whose concentration is tuned so the mean KL divergence meets the model's
    budget, then evaluates the cross-entropy against the correct class and
    against one uniformly drawn incorrect class.  An inseparable model is
    reported as such without running.
    """
    if n_samples <= 0:
        raise InputError("n_samples must be positive")
    if not model.valid:
        thresholds = None
        try:
            thresholds = separation_thresholds(model)
        except InputError:
            pass
        return SeparationReport(
            model=model, thresholds=thresholds, n_samples=n_samples, seed=seed, ran=False
        )
    thresholds = separation_thresholds(model)
    probs = model.label_distribution()
    c = model.num_classes

    if model.kl_budget == 0.0:
        estimates = np.tile(probs, (n_samples, 1))
        concentration = math.inf
        mean_kl = 0.0
    else:
        rng = derive_rng(seed, "separation", "uniforms")
        uniforms = rng.random((n_samples, c))
        # Guard the open interval so the gamma quantile stays finite.
        uniforms = np.clip(uniforms, 1e-12, 1.0 - 1e-12)
        concentration = _fit_concentration(probs, uniforms, model.kl_budget)
        estimates = _perturbed(probs, uniforms, concentration)
        mean_kl = _mean_kl(probs, estimates)

    wrong_rng = derive_rng(seed, "separation", "wrong-class")
    wrong = 1 + wrong_rng.integers(0, c - 1, size=n_samples)
    with np.errstate(divide="ignore"):
        loss_correct = -np.log(estimates[:, 0])
        loss_incorrect = -np.log(estimates[np.arange(n_samples), wrong])
    return SeparationReport(
        model=model,
        thresholds=thresholds,
        n_samples=n_samples,
        seed=seed,
        ran=True,
        concentration=concentration,
        mean_kl=mean_kl,
        violation_rate_correct=float(np.mean(loss_correct >= thresholds.lower)),
        violation_rate_incorrect=float(np.mean(loss_incorrect <= thresholds.upper)),
    )
