"""Thresholding rules and the two shrinkage estimators built on them.

`universal_estimate` works level by level (cutoff in resolution levels);
`pipeline_shrink` works on the flattened coarse-to-fine index (cutoffs are
coefficient counts). Keep the two index conventions apart.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .wavelet import CoeffPyramid

__all__ = [
    "ThresholdKind",
    "ThresholdRule",
    "PipelineShrinkConfig",
    "soft_threshold",
    "hard_threshold",
    "universal_threshold",
    "universal_cutoff_level",
    "universal_estimate",
    "pipeline_shrink",
]


class ThresholdKind(str, Enum):
    SOFT = "soft"
    HARD = "hard"


def _check_lambda(lam):
    if np.any(np.asarray(lam) < 0):
        raise ValueError(f"threshold must be nonnegative, got {lam}")


def soft_threshold(x, lam):
    """sign(x) * max(|x| - lam, 0), elementwise."""
    _check_lambda(lam)
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)
    return float(out) if out.ndim == 0 else out


def hard_threshold(x, lam):
    """Keep entries with |x| > lam, zero the rest."""
    _check_lambda(lam)
    x = np.asarray(x, dtype=float)
    out = np.where(np.abs(x) > lam, x, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ThresholdRule:
    kind: ThresholdKind = ThresholdKind.SOFT
    lam: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ThresholdKind(self.kind))
        _check_lambda(self.lam)

    def __call__(self, x, lam=None):
        lam = self.lam if lam is None else lam
        if self.kind is ThresholdKind.SOFT:
            return soft_threshold(x, lam)
        return hard_threshold(x, lam)


def universal_threshold(epsilon: float) -> float:
    """λ_ε·ε with λ_ε = sqrt(2 ln ε⁻²)."""
    _check_epsilon(epsilon)
    return epsilon * math.sqrt(2.0 * math.log(epsilon**-2))


def universal_cutoff_level(epsilon: float) -> float:
    """Finest thresholded level, J = log2 ε⁻²; levels j <= J are kept."""
    _check_epsilon(epsilon)
    return 2.0 * math.log2(1.0 / epsilon)


def _check_epsilon(epsilon):
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")


def universal_estimate(pyramid: CoeffPyramid, epsilon: float, kind=ThresholdKind.SOFT) -> CoeffPyramid:
    """Universal-threshold estimator on a sequence-model pyramid.

    Detail levels ``j <= log2 ε⁻²`` are thresholded at ``ε·sqrt(2 ln ε⁻²)``,
    finer levels are set to zero, the scaling block is returned untouched.
    The pyramid is assumed to be on the sequence scale (noise level ε), so a
    raw DWT of an N-sample series must first be divided by √N.
    """
    rule = ThresholdRule(kind, universal_threshold(epsilon))
    J = universal_cutoff_level(epsilon)

    def shrink(block, level):
        if level is None:
            return block.copy()
        if level <= J:
            return rule(block)
        return np.zeros_like(block)

    return pyramid.map(shrink)


@dataclass(frozen=True)
class PipelineShrinkConfig:
    """Keep-T / threshold-to-J / zero-rest on flattened coefficient indices.

    ``T`` leading (coarsest) coefficients are copied, indices ``T..J-1`` are
    thresholded at ``lam`` and everything from ``J`` on is zeroed.
    """

    T: int = 20
    J: int = 20
    lam: float = 0.0
    kind: ThresholdKind = ThresholdKind.SOFT

    def __post_init__(self):
        if self.T < 0 or self.J < self.T:
            raise ValueError(f"need 0 <= T <= J, got T={self.T}, J={self.J}")
        _check_lambda(self.lam)
        object.__setattr__(self, "kind", ThresholdKind(self.kind))

    def check(self, n_coeffs: int):
        if self.J > n_coeffs:
            raise ValueError(f"J={self.J} exceeds the {n_coeffs} available coefficients")


def pipeline_shrink(pyramid, cfg: PipelineShrinkConfig) -> np.ndarray:
    """Flattened feature vector(s) after keep/threshold/zero.

    Accepts a `CoeffPyramid` or an already flattened array (last axis is the
    coefficient index). Output keeps the full coefficient count.
    """
    flat = pyramid.flatten() if isinstance(pyramid, CoeffPyramid) else np.asarray(pyramid, dtype=float)
    cfg.check(flat.shape[-1])
    out = np.zeros_like(flat)
    out[..., : cfg.T] = flat[..., : cfg.T]
    out[..., cfg.T : cfg.J] = ThresholdRule(cfg.kind, cfg.lam)(flat[..., cfg.T : cfg.J])
    return out
