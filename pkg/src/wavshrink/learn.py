"""Feature extraction, PCA + LDA, and cross-validation harnesses.

Features are computed per trial without any fitting, so they are computed once
per configuration and shared by all folds; PCA and LDA are refit on the
training rows of every fold.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import linalg

from .data import Dataset, Trial
from .rng import seed_of, stream
from .shrink import PipelineShrinkConfig, ThresholdKind, pipeline_shrink
from .wavelet import dwt, get_family, pad_to_dyadic

__all__ = [
    "extract_features",
    "fourier_basis",
    "fourier_features",
    "PcaBasis",
    "pca_fit",
    "pca_transform",
    "LdaModel",
    "SingularCovarianceError",
    "lda_fit",
    "lda_predict",
    "PipelineConfig",
    "FittedPipeline",
    "fit_pipeline",
    "FoldResult",
    "Report",
    "cross_validate",
    "GridResult",
    "grid_search",
]


def _samples(trial) -> np.ndarray:
    if isinstance(trial, (Trial, Dataset)):
        return trial.samples
    x = np.asarray(trial, dtype=float)
    if x.ndim < 2:
        raise ValueError("a trial is a (channels, samples) matrix")
    return x


def extract_features(trial, family="haar", cfg: PipelineShrinkConfig = PipelineShrinkConfig()) -> np.ndarray:
    """Wavelet features: pad, DWT and keep/threshold/zero every channel, then
    concatenate channels. Accepts one trial ``(C, S)`` or a stack ``(n, C, S)``."""
    x = _samples(trial)
    padded, _ = pad_to_dyadic(x)
    coeffs = pipeline_shrink(dwt(padded, get_family(family)), cfg)
    return coeffs.reshape(coeffs.shape[:-2] + (-1,))


def fourier_basis(n: int, K: int) -> np.ndarray:
    """First K real trigonometric functions on the grid l/n, shape (K, n).

    Order: 1, √2 cos 2πt, √2 sin 2πt, √2 cos 4πt, ... The Nyquist cosine (even
    n, K = n) is left unscaled so the full set stays orthonormal under the
    grid inner product ``(1/n) Σ f g``.
    """
    if not 1 <= K <= n:
        raise ValueError(f"K must be in 1..{n}, got {K}")
    t = np.arange(n) / n
    rows = [np.ones(n)]
    k = 1
    while len(rows) < K:
        if 2 * k == n:
            rows.append(np.cos(2 * np.pi * k * t))
        else:
            rows.append(np.sqrt(2) * np.cos(2 * np.pi * k * t))
            if len(rows) < K:
                rows.append(np.sqrt(2) * np.sin(2 * np.pi * k * t))
        k += 1
    return np.array(rows)


def fourier_features(trial, K: int) -> np.ndarray:
    """Projection of every channel on the first K trigonometric functions."""
    x = _samples(trial)
    n = x.shape[-1]
    coeffs = x @ fourier_basis(n, K).T / n
    return coeffs.reshape(coeffs.shape[:-2] + (-1,))


# PCA ------------------------------------------------------------------------

@dataclass
class PcaBasis:
    """Top-P principal directions; `components` is (P, d) with orthonormal rows."""

    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    repeated_eigenvalues: bool = False

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


def _fix_signs(V):
    idx = np.argmax(np.abs(V), axis=1)
    s = np.sign(V[np.arange(V.shape[0]), idx])
    s[s == 0] = 1.0
    return V * s[:, None]


def pca_fit(features, P: int) -> PcaBasis:
    """PCA of the sample covariance, top P directions by eigenvalue.

    Columns with zero training variance (structural zeros of the shrinkage
    features) carry no variance and are handled without entering the
    decomposition, which runs on the remaining columns: `eigh` of the
    covariance when there are fewer columns than rows, a thin SVD otherwise.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise ValueError("features must be an (n, d) matrix")
    n, d = X.shape
    if n < 2:
        raise ValueError("need at least two rows")
    if not 1 <= P <= min(n, d):
        raise ValueError(f"P must be in 1..min(n, d) = {min(n, d)}, got {P}")
    mean = X.mean(axis=0)
    Xc = X - mean
    active = np.flatnonzero(Xc.std(axis=0) > 0)
    A = Xc[:, active]
    if active.size and active.size <= n:
        evals, evecs = np.linalg.eigh(A.T @ A / (n - 1))
        evals, evecs = evals[::-1], evecs[:, ::-1].T
    elif active.size:
        _, s, vt = np.linalg.svd(A, full_matrices=False)
        evals, evecs = s**2 / (n - 1), vt
    else:
        evals, evecs = np.zeros(0), np.zeros((0, 0))
    evals = np.clip(evals, 0.0, None)
    comps = np.zeros((min(P, evals.size), d))
    comps[:, active] = evecs[: comps.shape[0]]
    if comps.shape[0] < P:
        # Fill with unit vectors on zero-variance columns (eigenvalue 0).
        inactive = np.setdiff1d(np.arange(d), active)[: P - comps.shape[0]]
        extra = np.zeros((inactive.size, d))
        extra[np.arange(inactive.size), inactive] = 1.0
        comps = np.vstack([comps, extra])
        evals = np.concatenate([evals[: P - extra.shape[0]], np.zeros(extra.shape[0])])
    evals = evals[:P]
    comps = _fix_signs(comps)
    scale = max(float(evals[0]) if evals.size else 0.0, 1e-300)
    repeated = bool(np.any(np.abs(np.diff(evals)) <= 1e-10 * scale)) if evals.size > 1 else False
    return PcaBasis(mean, comps, evals, repeated)


def pca_transform(basis: PcaBasis, features) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    if x.shape[-1] != basis.mean.size:
        raise ValueError(f"feature dimension {x.shape[-1]} does not match basis dimension {basis.mean.size}")
    return (x - basis.mean) @ basis.components.T


# LDA ------------------------------------------------------------------------

class SingularCovarianceError(np.linalg.LinAlgError):
    pass


@dataclass
class LdaModel:
    labels: np.ndarray
    class_means: np.ndarray
    covariance: np.ndarray
    priors: np.ndarray
    gamma: float
    weights: np.ndarray = field(repr=False)
    offsets: np.ndarray = field(repr=False)

    def scores(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.class_means.shape[1]:
            raise ValueError(f"input dimension {x.shape[-1]} does not match model dimension {self.class_means.shape[1]}")
        return x @ self.weights + self.offsets

    def predict(self, x) -> np.ndarray:
        s = self.scores(np.atleast_2d(x))
        # Near-ties (within rounding) resolve to the smallest label.
        top = s.max(axis=1, keepdims=True)
        tied = s >= top - 1e-9 * (1.0 + np.abs(top))
        return self.labels[np.argmax(tied, axis=1)]


def lda_fit(projected, labels, gamma: float = 1e-3, priors: str = "empirical") -> LdaModel:
    """Gaussian LDA with a shared, ridge-regularized covariance.

    The pooled within-class covariance Σ is replaced by
    ``Σ + gamma * tr(Σ)/P * I`` (``Σ + gamma * I`` when tr(Σ) = 0) and the discriminant of class k is
    ``x' Σ⁻¹ μ_k - μ_k' Σ⁻¹ μ_k / 2 + log π_k``.
    """
    Z = np.asarray(projected, dtype=float)
    y = np.asarray(labels)
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise ValueError("need at least two classes")
    if counts.min() < 2:
        raise ValueError("every class needs at least two samples")
    n, P = Z.shape
    means = np.array([Z[y == c].mean(axis=0) for c in classes])
    resid = Z - means[np.searchsorted(classes, y)]
    cov = resid.T @ resid / (n - classes.size)
    # Ridge relative to the average variance; unit scale if there is none.
    scale = np.trace(cov) / P
    reg = cov + gamma * (scale if scale > 0 else 1.0) * np.eye(P)
    evals = np.linalg.eigvalsh(reg)
    if evals[0] <= 1e-12 * max(evals[-1], 1e-300):
        raise SingularCovarianceError("pooled covariance is singular; use a positive gamma")
    factor = linalg.cho_factor(reg)
    W = linalg.cho_solve(factor, means.T)
    if priors == "empirical":
        pi = counts / counts.sum()
    elif priors == "uniform":
        pi = np.full(classes.size, 1.0 / classes.size)
    else:
        raise ValueError(f"unknown priors {priors!r}")
    offsets = -0.5 * np.einsum("kp,pk->k", means, W) + np.log(pi)
    return LdaModel(classes, means, reg, pi, gamma, W, offsets)


def lda_predict(model: LdaModel, x) -> tuple[int, np.ndarray]:
    s = model.scores(np.asarray(x, dtype=float))
    return int(model.predict(x)[0]), s


# Pipeline ---------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    target: str = "direction"
    features: str = "wavelet"
    family: str = "haar"
    T: int = 20
    J: int = 20
    lam: float = 0.0
    kind: str = "soft"
    K: int = 20
    P: int = 200
    gamma: float = 1e-3
    priors: str = "empirical"

    def __post_init__(self):
        if self.features not in ("wavelet", "fourier"):
            raise ValueError(f"features must be wavelet or fourier, got {self.features!r}")
        if self.target not in ("direction", "type"):
            raise ValueError(f"target must be direction or type, got {self.target!r}")
        get_family(self.family)
        self.shrink  # validates T, J, lam

    @property
    def shrink(self) -> PipelineShrinkConfig:
        return PipelineShrinkConfig(self.T, self.J, self.lam, ThresholdKind(self.kind))

    def feature_key(self):
        if self.features == "fourier":
            return ("fourier", self.K)
        return ("wavelet", self.family, self.T, self.J, self.lam, self.kind)

    def to_dict(self) -> dict:
        return asdict(self)


def compute_features(samples, cfg: PipelineConfig) -> np.ndarray:
    if cfg.features == "fourier":
        return fourier_features(samples, cfg.K)
    return extract_features(samples, cfg.family, cfg.shrink)


@dataclass
class FittedPipeline:
    config: PipelineConfig
    pca: PcaBasis
    lda: LdaModel
    n_channels: int
    n_samples: int

    def predict(self, trials) -> np.ndarray:
        x = _samples(trials)
        if x.shape[-2:] != (self.n_channels, self.n_samples):
            raise ValueError(f"trial layout {x.shape[-2:]} does not match {(self.n_channels, self.n_samples)}")
        return self.lda.predict(pca_transform(self.pca, compute_features(x, self.config)))


def _fit(features, labels, cfg: PipelineConfig):
    pca = pca_fit(features, cfg.P)
    lda = lda_fit(pca_transform(pca, features), labels, cfg.gamma, cfg.priors)
    return pca, lda


def fit_pipeline(dataset: Dataset, cfg: PipelineConfig, features=None) -> FittedPipeline:
    feats = compute_features(dataset.samples, cfg) if features is None else features
    pca, lda = _fit(feats, dataset.labels(cfg.target), cfg)
    return FittedPipeline(cfg, pca, lda, dataset.n_channels, dataset.n_samples)


@dataclass
class FoldResult:
    fold: int
    held_out: list
    n_train: int
    n_test: int
    accuracy: float | None
    skipped: str | None = None
    pca: PcaBasis | None = field(default=None, repr=False)
    lda: LdaModel | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "fold": self.fold,
            "held_out": self.held_out,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "accuracy": self.accuracy,
            "skipped": self.skipped,
        }


@dataclass
class Report:
    config: PipelineConfig
    scheme: str
    seed: int
    labels: list
    confusion: np.ndarray
    folds: list[FoldResult]
    shuffled: bool = False

    @property
    def n_evaluated(self) -> int:
        return int(self.confusion.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion) / self.n_evaluated) if self.n_evaluated else float("nan")

    @property
    def per_class_accuracy(self) -> np.ndarray:
        rows = self.confusion.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.diag(self.confusion) / rows

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "scheme": self.scheme,
            "seed": self.seed,
            "shuffled_labels": self.shuffled,
            "labels": [int(v) for v in self.labels],
            "accuracy": self.accuracy,
            "per_class_accuracy": [None if math.isnan(v) else float(v) for v in self.per_class_accuracy],
            "confusion": self.confusion.astype(int).tolist(),
            "n_evaluated": self.n_evaluated,
            "folds": [f.to_dict() for f in self.folds],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def confusion_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\pred"] + [int(v) for v in self.labels])
        for lab, row in zip(self.labels, self.confusion):
            w.writerow([int(lab)] + [int(v) for v in row])
        return buf.getvalue()


def _folds(dataset: Dataset, scheme: str, n_folds: int, seed):
    if scheme in ("loso", "leave-one-session-out"):
        sessions = np.unique(dataset.session)
        if sessions.size < 2:
            raise ValueError("leave-one-session-out needs at least two sessions")
        return [([int(s)], np.flatnonzero(dataset.session == s)) for s in sessions]
    if scheme in ("kfold", "k-fold"):
        if not 2 <= n_folds <= len(dataset):
            raise ValueError(f"n_folds must be in 2..{len(dataset)}")
        perm = stream(seed, 7).permutation(len(dataset))
        return [([k], np.sort(chunk)) for k, chunk in enumerate(np.array_split(perm, n_folds))]
    raise ValueError(f"unknown scheme {scheme!r}")


def cross_validate(
    dataset: Dataset,
    config: PipelineConfig = PipelineConfig(),
    scheme: str = "loso",
    seed=0,
    *,
    n_folds: int = 5,
    shuffle_labels: bool = False,
    features=None,
    keep_models: bool = False,
    n_workers: int = 1,
) -> Report:
    """Per-fold PCA + LDA on training rows, scored on the held-out rows.

    ``loso`` holds out one session per fold; ``kfold`` splits a seeded
    permutation into `n_folds` parts. A fold whose training rows miss a class
    is skipped and flagged. `shuffle_labels` permutes the labels once with the
    seed (a permutation-null control).
    """
    seed_int = seed_of(seed)
    y = dataset.labels(config.target)
    if shuffle_labels:
        y = stream(seed_int, 3).permutation(y)
    labels = np.unique(y)
    feats = compute_features(dataset.samples, config) if features is None else features
    folds = _folds(dataset, scheme, n_folds, seed_int)

    def run(k):
        held, test = folds[k]
        train = np.setdiff1d(np.arange(len(dataset)), test)
        missing = np.setdiff1d(labels, np.unique(y[train]))
        if missing.size:
            return FoldResult(k, held, train.size, test.size, None, f"training set lacks classes {missing.tolist()}"), None
        pca, lda = _fit(feats[train], y[train], config)
        pred = lda.predict(pca_transform(pca, feats[test]))
        conf = np.zeros((labels.size, labels.size), dtype=np.int64)
        np.add.at(conf, (np.searchsorted(labels, y[test]), np.searchsorted(labels, pred)), 1)
        res = FoldResult(k, held, train.size, test.size, float(np.mean(pred == y[test])))
        if keep_models:
            res.pca, res.lda = pca, lda
        return res, conf

    if n_workers > 1:
        with ThreadPoolExecutor(n_workers) as ex:
            out = list(ex.map(run, range(len(folds))))
    else:
        out = [run(k) for k in range(len(folds))]
    confusion = np.zeros((labels.size, labels.size), dtype=np.int64)
    for _, conf in out:
        if conf is not None:
            confusion += conf
    return Report(config, scheme, seed_int, labels.tolist(), confusion, [r for r, _ in out], shuffle_labels)


# Grid search ------------------------------------------------------------------

@dataclass
class GridResult:
    best: PipelineConfig
    best_accuracy: float
    table: list[dict]
    skipped: list[dict]

    TABLE_FIELDS = ("family", "T", "J", "lam", "P", "accuracy", "n_evaluated")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.TABLE_FIELDS, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for row in self.table:
            w.writerow({**row, "accuracy": repr(row["accuracy"])})
        return buf.getvalue()


def grid_search(
    dataset: Dataset,
    *,
    T: Sequence[int],
    J: Sequence[int],
    lam: Sequence[float],
    P: Sequence[int],
    family: Sequence[str] = ("haar",),
    base: PipelineConfig = PipelineConfig(),
    scheme: str = "loso",
    seed=0,
    n_folds: int = 5,
    n_workers: int = 1,
) -> GridResult:
    """Cross-validate every feasible (family, T, J, lam, P) combination.

    Pairs with J < T are not enumerated. Combinations that cannot run (J above
    the coefficient count, P above the training size) are listed in `skipped`.
    The best row maximizes accuracy; ties go to smaller P, then J, T, lam, and
    earlier family.
    """
    grids = {"family": list(family), "T": list(T), "J": list(J), "lam": list(lam), "P": list(P)}
    if any(not g for g in grids.values()):
        raise ValueError("every grid must be nonempty")
    n_coeffs = 1 << (dataset.n_samples - 1).bit_length()
    min_train = min(len(dataset) - idx.size for _, idx in _folds(dataset, scheme, n_folds, seed_of(seed)))
    table, skipped, cache = [], [], {}
    for fam, t, j, lm, p in itertools.product(*grids.values()):
        if j < t:
            continue
        combo = {"family": fam, "T": t, "J": j, "lam": lm, "P": p}
        if j > n_coeffs:
            skipped.append({**combo, "reason": f"J exceeds {n_coeffs} coefficients"})
            continue
        if p > min(min_train, dataset.n_channels * n_coeffs):
            skipped.append({**combo, "reason": f"P exceeds training size {min_train}"})
            continue
        cfg = replace(base, features="wavelet", family=fam, T=t, J=j, lam=lm, P=p)
        key = cfg.feature_key()
        if key not in cache:
            cache = {key: compute_features(dataset.samples, cfg)}
        rep = cross_validate(dataset, cfg, scheme, seed, n_folds=n_folds, features=cache[key], n_workers=n_workers)
        table.append({**combo, "accuracy": rep.accuracy, "n_evaluated": rep.n_evaluated, "_cfg": cfg})
    if not table:
        raise ValueError("no feasible grid combination")
    fam_order = {f: i for i, f in enumerate(grids["family"])}
    best = min(table, key=lambda r: (-r["accuracy"], r["P"], r["J"], r["T"], r["lam"], fam_order[r["family"]]))
    cfg = best["_cfg"]
    for r in table:
        del r["_cfg"]
    return GridResult(cfg, best["accuracy"], table, skipped)
