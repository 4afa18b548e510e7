"""Periodized orthonormal discrete wavelet transform.

Signals are numpy arrays whose *last* axis is time, so a stack of trials or a
batch of Monte-Carlo replications goes through `dwt` / `idwt` in one call.
Coefficients are kept in a `CoeffPyramid`; `flatten` orders them coarse to
fine: ``[scaling, detail L, detail L+1, ...]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "WaveletFamily",
    "HAAR",
    "DAUB4",
    "DAUB8",
    "FAMILIES",
    "get_family",
    "CoeffPyramid",
    "dwt",
    "idwt",
    "pad_to_dyadic",
    "is_dyadic",
    "WaveletLengthError",
    "PyramidStructureError",
]


class WaveletLengthError(ValueError):
    """Signal length is not usable for a dyadic transform."""


class PyramidStructureError(ValueError):
    """Coefficient blocks do not have dyadic sizes."""


class FamilyName(str, Enum):
    HAAR = "haar"
    DAUB4 = "daub4"
    DAUB8 = "daub8"


_SQ3 = np.sqrt(3.0)

_LOWPASS = {
    FamilyName.HAAR: np.array([1.0, 1.0]) / np.sqrt(2.0),
    FamilyName.DAUB4: np.array([1 + _SQ3, 3 + _SQ3, 3 - _SQ3, 1 - _SQ3]) / (4 * np.sqrt(2.0)),
    # 4 vanishing moments, extremal phase.
    FamilyName.DAUB8: np.array([
        0.2303778133088965,
        0.7148465705529157,
        0.6308807679298589,
        -0.027983769416859854,
        -0.18703481171909309,
        0.030841381835560764,
        0.0328830116668852,
        -0.010597401785069032,
    ]),
}


@dataclass(frozen=True)
class WaveletFamily:
    """Orthonormal two-channel filter bank.

    The highpass filter is the quadrature mirror ``g[n] = (-1)**n h[L-1-n]``
    of the lowpass ``h``; both invariants (unit DC gain √2 and orthonormality
    under even shifts) are checked at construction.
    """

    name: str
    lowpass: np.ndarray = field(repr=False)

    def __post_init__(self):
        h = np.asarray(self.lowpass, dtype=float)
        if h.ndim != 1 or h.size == 0 or h.size % 2:
            raise ValueError(f"{self.name}: lowpass must have an even, nonzero tap count")
        if abs(h.sum() - np.sqrt(2.0)) > 1e-12:
            raise ValueError(f"{self.name}: lowpass taps must sum to sqrt(2)")
        g = _qmf(h)
        for shift in range(0, h.size, 2):
            want = 1.0 if shift == 0 else 0.0
            if abs(_shifted_dot(h, h, shift) - want) > 1e-12 or abs(_shifted_dot(g, g, shift) - want) > 1e-12:
                raise ValueError(f"{self.name}: filters are not orthonormal under shift {shift}")
            if abs(_shifted_dot(h, g, shift)) > 1e-12 or abs(_shifted_dot(g, h, shift)) > 1e-12:
                raise ValueError(f"{self.name}: lowpass and highpass are not orthogonal")
        object.__setattr__(self, "lowpass", h)

    @property
    def highpass(self) -> np.ndarray:
        return _qmf(self.lowpass)

    def __len__(self) -> int:
        return self.lowpass.size


def _qmf(h):
    n = np.arange(h.size)
    return (-1.0) ** n * h[::-1]


def _shifted_dot(a, b, shift):
    return float(np.dot(a[shift:], b[: a.size - shift]))


HAAR = WaveletFamily("haar", _LOWPASS[FamilyName.HAAR])
DAUB4 = WaveletFamily("daub4", _LOWPASS[FamilyName.DAUB4])
DAUB8 = WaveletFamily("daub8", _LOWPASS[FamilyName.DAUB8])
FAMILIES = {f.name: f for f in (HAAR, DAUB4, DAUB8)}


def get_family(family) -> WaveletFamily:
    """Accept a `WaveletFamily` or one of the names ``haar``, ``daub4``, ``daub8``."""
    if isinstance(family, WaveletFamily):
        return family
    try:
        return FAMILIES[str(family).lower()]
    except KeyError:
        raise ValueError(f"unknown wavelet family {family!r}; choose from {sorted(FAMILIES)}") from None


def is_dyadic(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass
class CoeffPyramid:
    """Multilevel coefficients of one signal or a stack of signals.

    ``scaling`` has trailing size ``2**coarse_level`` and ``details[i]`` holds
    level ``coarse_level + i`` with trailing size ``2**(coarse_level + i)``.
    Leading axes, if any, are batch axes shared by all blocks.
    """

    coarse_level: int
    scaling: np.ndarray
    details: list[np.ndarray]
    original_length: int | None = None

    def __post_init__(self):
        self.scaling = np.asarray(self.scaling, dtype=float)
        self.details = [np.asarray(d, dtype=float) for d in self.details]
        if self.coarse_level < 0:
            raise PyramidStructureError("coarse_level must be nonnegative")
        if self.scaling.shape[-1:] != (2**self.coarse_level,):
            raise PyramidStructureError(
                f"scaling block has {self.scaling.shape[-1:]} entries, expected {2**self.coarse_level}"
            )
        batch = self.scaling.shape[:-1]
        for i, d in enumerate(self.details):
            j = self.coarse_level + i
            if d.shape != batch + (2**j,):
                raise PyramidStructureError(
                    f"detail level {j} has shape {d.shape}, expected {batch + (2**j,)}"
                )
        if self.original_length is None:
            self.original_length = self.size

    @property
    def max_level(self) -> int:
        """J_max: the signal length is ``2**max_level``."""
        return self.coarse_level + len(self.details)

    @property
    def size(self) -> int:
        return 2**self.max_level

    @property
    def batch_shape(self) -> tuple:
        return self.scaling.shape[:-1]

    @property
    def levels(self) -> range:
        """Resolution levels present as detail blocks."""
        return range(self.coarse_level, self.max_level)

    def detail(self, j: int) -> np.ndarray:
        return self.details[j - self.coarse_level]

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.scaling, *self.details], axis=-1)

    @classmethod
    def unflatten(cls, flat, coarse_level: int = 0, original_length: int | None = None) -> "CoeffPyramid":
        flat = np.asarray(flat, dtype=float)
        n = flat.shape[-1]
        if not is_dyadic(n) or n < 2**coarse_level:
            raise PyramidStructureError(f"cannot split {n} coefficients at coarse level {coarse_level}")
        J = n.bit_length() - 1
        edges = [2**coarse_level] + [2 ** (j + 1) for j in range(coarse_level, J)]
        scaling = flat[..., : edges[0]]
        details = [flat[..., edges[i] : edges[i + 1]] for i in range(len(edges) - 1)]
        return cls(coarse_level, scaling, details, original_length)

    def level_slices(self) -> list[tuple[int | None, slice]]:
        """(level, slice into `flatten`) pairs; level None marks the scaling block."""
        out = [(None, slice(0, 2**self.coarse_level))]
        for j in self.levels:
            out.append((j, slice(2**j, 2 ** (j + 1))))
        return out

    def map(self, fn) -> "CoeffPyramid":
        """Apply ``fn(block, level)`` to every block; scaling passes level None."""
        return CoeffPyramid(
            self.coarse_level,
            fn(self.scaling, None),
            [fn(d, j) for j, d in zip(self.levels, self.details)],
            self.original_length,
        )

    def copy(self) -> "CoeffPyramid":
        return self.map(lambda b, _: b.copy())

    def __add__(self, other: "CoeffPyramid") -> "CoeffPyramid":
        _check_same_layout(self, other)
        return CoeffPyramid(
            self.coarse_level,
            self.scaling + other.scaling,
            [a + b for a, b in zip(self.details, other.details)],
            self.original_length,
        )

    def __sub__(self, other: "CoeffPyramid") -> "CoeffPyramid":
        return self + other.map(lambda b, _: -b)

    def __mul__(self, t) -> "CoeffPyramid":
        return self.map(lambda b, _: b * t)

    __rmul__ = __mul__

    def __truediv__(self, t) -> "CoeffPyramid":
        return self.map(lambda b, _: b / t)

    @classmethod
    def zeros(cls, max_level: int, coarse_level: int = 0, batch_shape: tuple = ()) -> "CoeffPyramid":
        return cls.unflatten(np.zeros(batch_shape + (2**max_level,)), coarse_level)


def _check_same_layout(a, b):
    if a.coarse_level != b.coarse_level or a.max_level != b.max_level:
        raise PyramidStructureError("pyramids have different layouts")


def _analysis_index(n, taps):
    k = np.arange(n // 2)[:, None]
    return (2 * k + np.arange(taps)[None, :]) % n


def _check_length(n, coarse_level):
    if not is_dyadic(n):
        raise WaveletLengthError(f"signal length {n} is not a power of two; use pad_to_dyadic first")
    J = n.bit_length() - 1
    if coarse_level < 0 or coarse_level > J:
        raise WaveletLengthError(f"coarse level {coarse_level} not in [0, log2({n})={J}]")
    return J


def dwt(signal, family=HAAR, coarse_level: int = 0) -> CoeffPyramid:
    """Periodized orthonormal DWT down to scaling level `coarse_level`.

    One analysis step maps ``x`` (length n) to
    ``a[k] = sum_m h[m] x[(2k+m) mod n]`` and the same with ``g`` for ``d``.
    """
    fam = get_family(family)
    x = np.asarray(signal, dtype=float)
    if x.ndim == 0:
        raise WaveletLengthError("signal must be at least one-dimensional")
    J = _check_length(x.shape[-1], coarse_level)
    h, g = fam.lowpass, fam.highpass
    details = []
    a = x
    for _ in range(J, coarse_level, -1):
        idx = _analysis_index(a.shape[-1], h.size)
        windows = a[..., idx]
        details.append(windows @ g)
        a = windows @ h
    return CoeffPyramid(coarse_level, a, details[::-1], x.shape[-1])


def idwt(pyramid: CoeffPyramid, family=HAAR) -> np.ndarray:
    """Inverse of `dwt`; returns the full dyadic-length signal.

    Use ``out[..., :pyramid.original_length]`` to drop right padding.
    """
    fam = get_family(family)
    if not isinstance(pyramid, CoeffPyramid):
        raise PyramidStructureError("idwt expects a CoeffPyramid")
    h, g = fam.lowpass, fam.highpass
    a = pyramid.scaling
    for d in pyramid.details:
        if d.shape != a.shape:
            raise PyramidStructureError("detail block does not match the running approximation size")
        n = 2 * a.shape[-1]
        idx = _analysis_index(n, h.size)
        out = np.zeros(a.shape[:-1] + (n,))
        for m in range(h.size):
            # idx[:, m] steps by 2 mod n: targets are distinct within one tap.
            out[..., idx[:, m]] += h[m] * a + g[m] * d
        a = out
    return a


def pad_to_dyadic(signal) -> tuple[np.ndarray, int]:
    """Zero-pad the last axis on the right up to the next power of two.

    Returns ``(padded, original_length)``.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise WaveletLengthError("cannot pad an empty signal")
    n = x.shape[-1]
    target = 1 << (n - 1).bit_length()
    if target == n:
        return x, n
    pad = [(0, 0)] * (x.ndim - 1) + [(0, target - n)]
    return np.pad(x, pad), n
