"""Minimum-distance decoding over finite prototype classes.

A class is a finite set of sampled functions, so the infimum over a class in
the decoder becomes a minimum over its prototypes. Distances are the grid
approximation of the L2[0, 1] norm.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .rng import as_seed_sequence, seed_of, stream
from .shrink import universal_estimate
from .wavelet import dwt, get_family, idwt, is_dyadic

__all__ = [
    "PrototypeClass",
    "ClassFamily",
    "SeparationError",
    "l2_distance",
    "class_distances",
    "min_distance_decode",
    "decode_batch",
    "measure_separation",
    "shrinkage_estimate",
    "ConsistencyRow",
    "ConsistencyResult",
    "consistency_experiment",
]


class SeparationError(ValueError):
    """Classes overlap or are not separated by a positive distance."""


def l2_distance(f, g):
    """sqrt(mean((f - g)**2)) over the last axis."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape[-1] != g.shape[-1]:
        raise ValueError(f"length mismatch: {f.shape[-1]} vs {g.shape[-1]}")
    d = np.sqrt(np.mean((f - g) ** 2, axis=-1))
    return float(d) if np.ndim(d) == 0 else d


@dataclass
class PrototypeClass:
    label: int
    prototypes: np.ndarray

    def __post_init__(self):
        self.prototypes = np.atleast_2d(np.asarray(self.prototypes, dtype=float))
        if self.prototypes.ndim != 2 or self.prototypes.shape[0] == 0:
            raise ValueError(f"class {self.label}: need a nonempty list of equal-length prototypes")
        self.label = int(self.label)

    @property
    def length(self) -> int:
        return self.prototypes.shape[1]


def measure_separation(classes) -> float:
    """Half the smallest distance between prototypes of different classes."""
    classes = classes.classes if isinstance(classes, ClassFamily) else list(classes)
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    best = math.inf
    for i, a in enumerate(classes):
        for b in classes[i + 1 :]:
            diff = a.prototypes[:, None, :] - b.prototypes[None, :, :]
            best = min(best, float(np.sqrt(np.mean(diff**2, axis=-1)).min()))
    return best / 2


@dataclass
class ClassFamily:
    """m >= 2 disjoint, separated prototype classes sorted by label."""

    classes: list[PrototypeClass]
    separation: float = field(init=False)

    def __post_init__(self):
        self.classes = sorted(self.classes, key=lambda c: c.label)
        if len(self.classes) < 2:
            raise ValueError("a class family needs at least two classes")
        labels = [c.label for c in self.classes]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate class labels in {labels}")
        if len({c.length for c in self.classes}) != 1:
            raise ValueError("all prototypes must share one length")
        self.separation = measure_separation(self.classes)
        if not self.separation > 0:
            raise SeparationError("classes are not separated (a prototype is shared or repeated across classes)")

    @property
    def labels(self) -> list[int]:
        return [c.label for c in self.classes]

    @property
    def length(self) -> int:
        return self.classes[0].length

    def __len__(self) -> int:
        return len(self.classes)


def class_distances(estimate, family: ClassFamily) -> np.ndarray:
    """Distance from each estimate to each class, shape (..., m), label order."""
    x = np.asarray(estimate, dtype=float)
    if x.shape[-1] != family.length:
        raise ValueError(f"estimate length {x.shape[-1]} does not match family length {family.length}")
    cols = [l2_distance(x[..., None, :], c.prototypes).min(axis=-1) for c in family.classes]
    return np.stack(cols, axis=-1)


def decode_batch(estimates, family: ClassFamily):
    """Vectorized `min_distance_decode`: returns (labels, distances)."""
    if not family.classes:
        raise ValueError("empty family")
    d = class_distances(estimates, family)
    # argmin returns the first minimum and classes are sorted by label.
    idx = np.argmin(d, axis=-1)
    labels = np.asarray(family.labels)[idx]
    return labels, np.take_along_axis(d, idx[..., None], axis=-1)[..., 0]


def min_distance_decode(estimate, family: ClassFamily) -> tuple[int, float]:
    """Label of the nearest class and the distance achieved; ties go to the smaller label."""
    labels, dist = decode_batch(np.asarray(estimate, dtype=float)[None, :], family)
    return int(labels[0]), float(dist[0])


def shrinkage_estimate(samples, sigma: float, family="haar"):
    """Wavelet universal-threshold estimate of f from samples f(l/N) + σZ.

    Works on the last axis; N must be dyadic. σ = 0 returns the samples.
    """
    x = np.asarray(samples, dtype=float)
    n = x.shape[-1]
    if sigma == 0:
        return x.copy()
    fam = get_family(family)
    root = math.sqrt(n)
    est = universal_estimate(dwt(x, fam) / root, sigma / root)
    return idwt(est * root, fam)


@dataclass(frozen=True)
class ConsistencyRow:
    N: int
    sigma: float
    s: float
    empirical_max_error: float
    theorem1_bound: float
    n_trials: int
    seed: int
    max_mse: float

    @property
    def binomial_se(self) -> float:
        p = self.empirical_max_error
        return math.sqrt(p * (1 - p) / self.n_trials)

    @property
    def bound_holds(self) -> bool:
        return self.empirical_max_error <= self.theorem1_bound + 3 * self.binomial_se


@dataclass
class ConsistencyResult:
    rows: list[ConsistencyRow]

    CSV_FIELDS = ("N", "sigma", "s", "empirical_max_error", "theorem1_bound", "n_trials", "seed")

    @property
    def bound_holds(self) -> bool:
        return all(r.bound_holds for r in self.rows)

    @property
    def nonincreasing(self) -> bool:
        """Error never rises by more than 3 combined standard errors as N grows."""
        for a, b in zip(self.rows, self.rows[1:]):
            slack = 3 * math.sqrt(a.binomial_se**2 + b.binomial_se**2)
            if b.empirical_max_error > a.empirical_max_error + slack:
                return False
        return True

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_FIELDS)
        for r in self.rows:
            w.writerow((r.N, r.sigma, repr(r.s), repr(r.empirical_max_error), repr(r.theorem1_bound), r.n_trials, r.seed))
        return buf.getvalue()


def consistency_experiment(
    family: ClassFamily | Callable[[int], ClassFamily],
    sigma: float,
    n_grid: Sequence[int],
    n_trials: int,
    seed=0,
    *,
    wavelet="haar",
    n_workers: int = 1,
) -> ConsistencyResult:
    """Decoding error of shrink-then-decode against the 1/s² risk bound.

    For every N and class, `n_trials` series f(l/N) + σZ are simulated (true f
    cycling through the class prototypes), estimated with the universal
    wavelet estimator and decoded. Each row reports the worst class error and
    the bound max-class-MSE / s².

    `family` is either a fixed family (all N must equal its length) or a
    callable returning the family sampled on an N-point grid.
    """
    if n_trials < 50:
        raise ValueError("n_trials must be at least 50 per class")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    for n in n_grid:
        if not is_dyadic(n):
            raise ValueError(f"grid length {n} is not dyadic")
    ss = as_seed_sequence(seed)
    families = [family(n) if callable(family) else family for n in n_grid]
    for n, fam in zip(n_grid, families):
        if fam.length != n:
            raise ValueError(f"family has length {fam.length}, grid asks for {n}")

    tasks = [(gi, ci) for gi in range(len(n_grid)) for ci in range(len(families[gi]))]

    def run(task):
        gi, ci = task
        fam = families[gi]
        cls = fam.classes[ci]
        rng = stream(ss, gi, ci)
        truth = cls.prototypes[np.arange(n_trials) % cls.prototypes.shape[0]]
        y = truth + sigma * rng.standard_normal(truth.shape)
        est = shrinkage_estimate(y, sigma, wavelet)
        labels, _ = decode_batch(est, fam)
        err = float(np.mean(labels != cls.label))
        mse = float(np.mean(l2_distance(est, truth) ** 2))
        return err, mse

    if n_workers > 1:
        with ThreadPoolExecutor(n_workers) as ex:
            out = list(ex.map(run, tasks))
    else:
        out = [run(t) for t in tasks]

    rows = []
    for gi, n in enumerate(n_grid):
        res = [o for t, o in zip(tasks, out) if t[0] == gi]
        err = max(r[0] for r in res)
        mse = max(r[1] for r in res)
        s = families[gi].separation
        rows.append(ConsistencyRow(n, sigma, s, err, mse / s**2, n_trials, seed_of(ss), mse))
    return ConsistencyResult(rows)
