"""Gaussian sequence model, Besov bodies and Monte-Carlo worst-case risk.

Risk is measured in coefficient space; the transform in `wavelet` is
orthonormal, so this equals the L2 risk of the reconstructed function.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .rng import as_seed_sequence, seed_of, stream
from .shrink import universal_estimate
from .wavelet import CoeffPyramid, dwt, get_family, pad_to_dyadic

__all__ = [
    "BesovBody",
    "BoundaryStyle",
    "SequenceObservation",
    "besov_norm",
    "least_favorable_level",
    "sample_boundary_theta",
    "observe",
    "CandidateRisk",
    "candidate_risks",
    "mc_sup_risk",
    "RateResult",
    "rate_experiment",
    "regression_to_sequence",
    "identity_estimator",
    "zero_estimator",
    "ESTIMATORS",
]

Estimator = Callable[[CoeffPyramid, float], CoeffPyramid]


@dataclass(frozen=True)
class BesovBody:
    """Θ^α_{p,q}(C) = {θ : Σ_j 2^{ajq} ‖θ_j·‖_p^q ≤ C^q}.

    The level weight exponent is ``a = α + 1/2 - 1/p`` (``1/p = 0`` for
    ``p = inf``), which makes the sup-risk of universal thresholding decay
    like ε^{2r} with ``r = 2α/(2α+1)``.
    """

    alpha: float
    p: float
    q: float
    C: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.p <= 0 or self.q <= 0:
            raise ValueError("p and q must be positive (inf allowed)")
        if self.C <= 0:
            raise ValueError("radius C must be positive")

    @property
    def a(self) -> float:
        inv_p = 0.0 if math.isinf(self.p) else 1.0 / self.p
        return self.alpha + 0.5 - inv_p

    @property
    def rate_exponent(self) -> float:
        """r = 2α/(2α+1); the minimax risk scales as ε^{2r}."""
        return 2 * self.alpha / (2 * self.alpha + 1)

    def contains(self, theta: CoeffPyramid, tol: float = 1e-12) -> bool:
        return bool(np.all(besov_norm(theta, self) <= self.C * (1 + tol)))

    def scaled(self, C: float) -> "BesovBody":
        return BesovBody(self.alpha, self.p, self.q, C)


def _lp(block, p):
    x = np.abs(block)
    if math.isinf(p):
        return x.max(axis=-1)
    return (x**p).sum(axis=-1) ** (1.0 / p)


def besov_norm(theta: CoeffPyramid, body: BesovBody):
    """(Σ_j 2^{ajq} ‖θ_j·‖_p^q)^{1/q}, with max forms for infinite p or q.

    The scaling block enters as an extra term at the coarse level L, alongside
    the detail block of level L. Batched pyramids give one value per item.
    """
    a = body.a
    terms = [2.0 ** (a * theta.coarse_level) * _lp(theta.scaling, body.p)]
    terms += [2.0 ** (a * j) * _lp(d, body.p) for j, d in zip(theta.levels, theta.details)]
    t = np.stack(terms, axis=-1)
    if math.isinf(body.q):
        out = t.max(axis=-1)
    else:
        out = (t**body.q).sum(axis=-1) ** (1.0 / body.q)
    return float(out) if np.ndim(out) == 0 else out


class BoundaryStyle(str, Enum):
    SINGLE_SPIKE = "single-spike"
    DENSE_LEVEL = "dense-level"
    RANDOM_SIGNS = "random-signs"


def least_favorable_level(body: BesovBody, epsilon: float, levels: range) -> int:
    """round(r·log2 ε⁻²), clamped into `levels`."""
    j = round(body.rate_exponent * 2 * math.log2(1 / epsilon))
    return int(min(max(j, levels.start), levels.stop - 1))


def sample_boundary_theta(
    body: BesovBody,
    max_level: int,
    rng=None,
    style=BoundaryStyle.SINGLE_SPIKE,
    *,
    level: int | None = None,
    epsilon: float | None = None,
    coarse_level: int = 0,
) -> CoeffPyramid:
    """A coefficient pyramid on the boundary of `body` (besov_norm == C).

    All mass sits in one detail level: at `level` if given, otherwise at the
    least-favorable level for noise `epsilon`. ``single-spike`` uses one
    coefficient, ``dense-level`` spreads equal positive magnitudes over the
    level and ``random-signs`` does the same with random signs.
    """
    style = BoundaryStyle(style)
    theta = CoeffPyramid.zeros(max_level, coarse_level)
    if level is None:
        if epsilon is None:
            raise ValueError("give either level or epsilon")
        level = least_favorable_level(body, epsilon, theta.levels)
    if level not in theta.levels:
        raise ValueError(f"level {level} not available in levels {list(theta.levels)}")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    block = theta.detail(level)
    level_norm = body.C * 2.0 ** (-body.a * level)
    if style is BoundaryStyle.SINGLE_SPIKE:
        block[int(rng.integers(block.size))] = level_norm
    else:
        n = block.size
        mag = level_norm if math.isinf(body.p) else level_norm / n ** (1.0 / body.p)
        block[:] = mag
        if style is BoundaryStyle.RANDOM_SIGNS:
            block *= rng.choice([-1.0, 1.0], size=n)
    return theta


@dataclass
class SequenceObservation:
    """y = θ + ε·z; `theta` may be None when only data are available."""

    theta: CoeffPyramid | None
    y: CoeffPyramid
    epsilon: float

    def __post_init__(self):
        if self.theta is not None and (
            self.theta.max_level != self.y.max_level or self.theta.coarse_level != self.y.coarse_level
        ):
            raise ValueError("theta and y must have identical shape")


def observe(theta: CoeffPyramid, epsilon: float, rng) -> SequenceObservation:
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    flat = theta.flatten()
    y = flat + epsilon * rng.standard_normal(flat.shape)
    return SequenceObservation(theta, CoeffPyramid.unflatten(y, theta.coarse_level), epsilon)


def identity_estimator(y: CoeffPyramid, epsilon: float) -> CoeffPyramid:
    return y


def zero_estimator(y: CoeffPyramid, epsilon: float) -> CoeffPyramid:
    return y.map(lambda b, _: np.zeros_like(b))


ESTIMATORS: dict[str, Estimator] = {
    "universal": universal_estimate,
    "identity": identity_estimator,
    "zero": zero_estimator,
}


@dataclass(frozen=True)
class CandidateRisk:
    style: str
    level: int
    risk: float


_CHUNK_ELEMS = 1 << 22


def _risk_of(theta: CoeffPyramid, epsilon, estimator, n_rep, rng) -> float:
    flat = theta.flatten()
    chunk = max(1, _CHUNK_ELEMS // flat.size)
    total = 0.0
    done = 0
    while done < n_rep:
        m = min(chunk, n_rep - done)
        y = flat + epsilon * rng.standard_normal((m, flat.size))
        est = estimator(CoeffPyramid.unflatten(y, theta.coarse_level), epsilon).flatten()
        total += float(((est - flat) ** 2).sum())
        done += m
    return total / n_rep


def candidate_risks(
    body: BesovBody,
    epsilon: float,
    estimator: Estimator,
    n_rep: int,
    styles: Sequence = tuple(BoundaryStyle),
    seed=0,
    *,
    max_level: int,
    coarse_level: int = 0,
    levels: Sequence[int] | None = None,
    n_workers: int = 1,
) -> list[CandidateRisk]:
    """Monte-Carlo risk E‖θ̂ − θ‖² for every (style, level) boundary element.

    Candidate ``i`` draws its θ and its noise from stream ``(seed, i)``, so the
    result does not depend on `n_workers`.
    """
    if n_rep < 100:
        raise ValueError("n_rep must be at least 100")
    styles = [BoundaryStyle(s) for s in styles]
    if levels is None:
        levels = range(coarse_level, max_level)
    cands = [(s, j) for s in styles for j in levels]
    if not cands:
        raise ValueError("empty candidate set")
    ss = as_seed_sequence(seed)

    def run(i):
        style, j = cands[i]
        rng = stream(ss, i)
        theta = sample_boundary_theta(body, max_level, rng, style, level=j, coarse_level=coarse_level)
        return CandidateRisk(style.value, j, _risk_of(theta, epsilon, estimator, n_rep, rng))

    if n_workers > 1:
        with ThreadPoolExecutor(n_workers) as ex:
            return list(ex.map(run, range(len(cands))))
    return [run(i) for i in range(len(cands))]


def mc_sup_risk(body, epsilon, estimator, n_rep, styles=tuple(BoundaryStyle), seed=0, **kw) -> float:
    """Largest candidate risk; a lower bound on the sup-risk over `body`."""
    return max(c.risk for c in candidate_risks(body, epsilon, estimator, n_rep, styles, seed, **kw))


@dataclass
class RateResult:
    body: BesovBody
    epsilons: list[float]
    sup_risks: list[float]
    slope: float
    slope_ci: tuple[float, float]
    n_rep: int
    seed: int
    candidates: list[list[CandidateRisk]] = field(repr=False, default_factory=list)

    CSV_FIELDS = ("alpha", "p", "q", "C", "epsilon", "style", "level", "risk", "n_rep", "seed")

    def rows(self):
        b = self.body
        for eps, cands in zip(self.epsilons, self.candidates):
            for c in cands:
                yield (b.alpha, b.p, b.q, b.C, eps, c.style, c.level, repr(c.risk), self.n_rep, self.seed)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_FIELDS)
        w.writerows(self.rows())
        return buf.getvalue()


def fit_loglog_slope(x, y, confidence=0.95):
    """Least-squares slope of log y on log x with a t-interval."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if lx.size < 3:
        raise ValueError("need at least 3 points to fit a slope with an interval")
    fit = stats.linregress(lx, ly)
    half = stats.t.ppf(0.5 + confidence / 2, lx.size - 2) * fit.stderr
    return float(fit.slope), (float(fit.slope - half), float(fit.slope + half))


def rate_experiment(
    body: BesovBody,
    epsilons: Sequence[float],
    estimator: Estimator = universal_estimate,
    n_rep: int = 2000,
    styles=tuple(BoundaryStyle),
    seed=0,
    *,
    max_level: int = 12,
    n_workers: int = 1,
) -> RateResult:
    """Sweep ε, estimate the sup-risk at each and fit the log-log slope.

    The pyramid depth is fixed across the sweep so that risks at different ε
    are comparable.
    """
    ss = as_seed_sequence(seed)
    all_c, sups = [], []
    for k, eps in enumerate(epsilons):
        sub = np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (k,))
        cands = candidate_risks(body, eps, estimator, n_rep, styles, sub, max_level=max_level, n_workers=n_workers)
        all_c.append(cands)
        sups.append(max(c.risk for c in cands))
    if len(epsilons) >= 3 and min(sups) > 0:
        slope, ci = fit_loglog_slope(epsilons, sups)
    else:
        slope, ci = float("nan"), (float("nan"), float("nan"))
    return RateResult(body, list(epsilons), sups, slope, ci, n_rep, seed_of(ss), all_c)


def regression_to_sequence(signal, family="haar", sigma: float = 1.0, clean=None) -> SequenceObservation:
    """Map samples Y_l = f(l/N) + σZ_l to sequence form.

    Coefficients are ``dwt(Y)/√N`` and the noise level is ``ε = σ/√N`` with N
    the (padded) dyadic length. If the noiseless samples `clean` are given they
    become `theta`.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x, _ = pad_to_dyadic(signal)
    n = x.shape[-1]
    if n < 2:
        raise ValueError("need at least 2 samples")
    fam = get_family(family)
    y = dwt(x, fam) / math.sqrt(n)
    theta = None
    if clean is not None:
        theta = dwt(pad_to_dyadic(clean)[0], fam) / math.sqrt(n)
    return SequenceObservation(theta, y, sigma / math.sqrt(n))
