"""Periodic orthogonal discrete wavelet transform.

Filters are produced by spectral factorization of the Daubechies half-band
polynomial and then polished with Newton steps on the orthogonality and
vanishing-moment equations, so no coefficient table is pasted in.

Indexing convention: at every level the analysis step is a circular
correlation anchored at index 0 followed by keeping the even shifts,

    a[k] = sum_m h[m] x[(2k + m) mod N],   d[k] = sum_m g[m] x[(2k + m) mod N],

with ``g[m] = (-1)**m h[L - 1 - m]``.  Coefficient ``(j, k)`` therefore
covers samples starting at ``k * 2**(J - j)``.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .exceptions import BadLevelRange, MalformedPyramid, NonDyadicLength


class BasisName(str, enum.Enum):
    DB3 = "db3"
    DB6 = "db6"
    SYM8 = "sym8"

    @classmethod
    def parse(cls, value: "BasisName | str") -> "BasisName":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown wavelet basis {value!r}; expected one of "
                             f"{[b.value for b in cls]}") from None


_VANISHING_MOMENTS = {BasisName.DB3: 3, BasisName.DB6: 6, BasisName.SYM8: 8}


@dataclass(frozen=True)
class FilterPair:
    lowpass: np.ndarray
    highpass: np.ndarray

    def __len__(self) -> int:
        return len(self.lowpass)


def _halfband_roots(n_moments: int) -> np.ndarray:
    # P(y) = sum_k C(N-1+k, k) y^k with y = sin^2(w/2)
    coefs = [comb(n_moments - 1 + k, k) for k in range(n_moments)]
    return np.roots(coefs[::-1])


def _z_roots(y: complex) -> np.ndarray:
    # y = (2 - z - 1/z) / 4  <=>  z^2 - (2 - 4y) z + 1 = 0
    r = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
    return r[np.argsort(np.abs(r))]


def _filter_from_roots(zeros, n_moments: int) -> np.ndarray:
    poly = np.array([1.0 + 0j])
    for _ in range(n_moments):
        poly = np.convolve(poly, [1.0, 1.0])
    for z in zeros:
        poly = np.convolve(poly, [1.0, -z])
    h = np.real(poly)
    return h * np.sqrt(2.0) / h.sum()


def _phase_nonlinearity(h: np.ndarray) -> float:
    w = np.linspace(0.0, np.pi, 512)[1:-1]
    response = np.exp(-1j * np.outer(w, np.arange(len(h)))) @ h
    phase = np.unwrap(np.angle(response))
    design = np.column_stack([w, np.ones_like(w)])
    fit, *_ = np.linalg.lstsq(design, phase, rcond=None)
    return float(np.sum((phase - design @ fit) ** 2))


def _root_groups(ys: np.ndarray) -> list[list[int]]:
    groups, used = [], set()
    for i, y in enumerate(ys):
        if i in used:
            continue
        if abs(y.imag) < 1e-10:
            groups.append([i])
            used.add(i)
            continue
        mate = min((k for k in range(len(ys)) if k not in used and k != i),
                   key=lambda k: abs(ys[k] - np.conj(y)))
        groups.append([i, mate])
        used |= {i, mate}
    return groups


def _defining_equations(h: np.ndarray, n_moments: int) -> np.ndarray:
    length = len(h)
    k = np.arange(length)
    eqs = []
    for m in range(n_moments):
        target = 1.0 if m == 0 else 0.0
        eqs.append(np.dot(h[: length - 2 * m], h[2 * m:]) - target)
    alt = (-1.0) ** k
    for p in range(n_moments):
        eqs.append(np.sum(alt * k ** p * h) / length ** p)
    return np.asarray(eqs)


def _jacobian(h: np.ndarray, n_moments: int) -> np.ndarray:
    length = len(h)
    k = np.arange(length)
    rows = []
    for m in range(n_moments):
        row = np.zeros(length)
        row[: length - 2 * m] += h[2 * m:]
        row[2 * m:] += h[: length - 2 * m]
        rows.append(row)
    alt = (-1.0) ** k
    for p in range(n_moments):
        rows.append(alt * k ** p / length ** p)
    return np.asarray(rows)


def _polish(h: np.ndarray, n_moments: int, steps: int = 8) -> np.ndarray:
    """Newton refinement of the filter on its defining equations."""
    h = h.copy()
    for _ in range(steps):
        resid = _defining_equations(h, n_moments)
        if np.max(np.abs(resid)) < 1e-16:
            break
        h = h - np.linalg.solve(_jacobian(h, n_moments), resid)
    return h


@lru_cache(maxsize=None)
def _lowpass(basis: BasisName) -> tuple[float, ...]:
    n_moments = _VANISHING_MOMENTS[basis]
    ys = _halfband_roots(n_moments)
    if basis is BasisName.SYM8:
        best, best_score = None, np.inf
        groups = _root_groups(ys)
        for bits in itertools.product((0, 1), repeat=len(groups)):
            zeros = [_z_roots(ys[i])[b] for b, g in zip(bits, groups) for i in g]
            cand = _filter_from_roots(zeros, n_moments)
            score = _phase_nonlinearity(cand)
            if score < best_score:
                best, best_score = cand, score
        h = best
    else:
        # extremal phase: every spectral zero taken inside the unit circle
        h = _filter_from_roots([_z_roots(y)[0] for y in ys], n_moments)
    return tuple(_polish(h, n_moments))


def wavelet_filters(basis: BasisName | str) -> FilterPair:
    """Return the orthonormal lowpass/highpass pair for ``basis``."""
    basis = BasisName.parse(basis)
    h = np.array(_lowpass(basis))
    length = len(h)
    g = np.array([(-1) ** k * h[length - 1 - k] for k in range(length)])
    h.setflags(write=False)
    g.setflags(write=False)
    return FilterPair(lowpass=h, highpass=g)


@dataclass
class WaveletCoefficients:
    """Mallat pyramid: scaling coefficients at ``j0`` plus details ``j0..J-1``.

    ``details[i]`` holds level ``j0 + i`` and has ``2**(j0 + i)`` entries along
    the last axis.  Leading axes, if any, are batch axes.
    """

    j0: int
    J: int
    scaling: np.ndarray
    details: list[np.ndarray]

    def level(self, j: int) -> np.ndarray:
        if not self.j0 <= j < self.J:
            raise BadLevelRange(f"level {j} outside [{self.j0}, {self.J - 1}]")
        return self.details[j - self.j0]

    @property
    def finest(self) -> np.ndarray:
        return self.details[-1]

    def copy(self) -> "WaveletCoefficients":
        return WaveletCoefficients(self.j0, self.J, self.scaling.copy(),
                                   [d.copy() for d in self.details])

    def to_array(self) -> np.ndarray:
        """Flatten as ``[scaling, d_j0, d_j0+1, ..., d_J-1]`` along the last axis."""
        return np.concatenate([self.scaling, *self.details], axis=-1)

    def validate(self) -> None:
        if not 0 <= self.j0 < self.J:
            raise MalformedPyramid(f"bad level range j0={self.j0}, J={self.J}")
        if self.scaling.shape[-1] != 2 ** self.j0:
            raise MalformedPyramid("scaling block has wrong length")
        if len(self.details) != self.J - self.j0:
            raise MalformedPyramid("wrong number of detail levels")
        for i, d in enumerate(self.details):
            if d.shape[-1] != 2 ** (self.j0 + i):
                raise MalformedPyramid(f"detail level {self.j0 + i} has length "
                                       f"{d.shape[-1]}, expected {2 ** (self.j0 + i)}")


def dyadic_level(n: int) -> int:
    """Return J with n == 2**J, raising NonDyadicLength otherwise."""
    if n < 1 or n & (n - 1):
        raise NonDyadicLength(f"length {n} is not a power of two")
    return n.bit_length() - 1


@lru_cache(maxsize=64)
def _gather_index(n: int, length: int) -> np.ndarray:
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(length)[None, :]) % n
    idx.setflags(write=False)
    return idx


def _analysis_step(x: np.ndarray, fp: FilterPair):
    windows = x[..., _gather_index(x.shape[-1], len(fp))]
    return windows @ fp.lowpass, windows @ fp.highpass


def _synthesis_step(a: np.ndarray, d: np.ndarray, fp: FilterPair) -> np.ndarray:
    half = a.shape[-1]
    n = 2 * half
    out = np.zeros(a.shape[:-1] + (n,))
    idx = _gather_index(n, len(fp))
    h, g = fp.lowpass, fp.highpass
    for m in range(len(fp)):
        # for fixed m the targets (2k + m) mod n are distinct
        out[..., idx[:, m]] += a * h[m] + d * g[m]
    return out


def forward_dwt(x, basis: BasisName | str, j0: int = 0) -> WaveletCoefficients:
    """Periodic Mallat pyramid of ``x`` (transform along the last axis)."""
    x = np.asarray(x, dtype=float)
    J = dyadic_level(x.shape[-1])
    if not 0 <= j0 < J:
        raise BadLevelRange(f"need 0 <= j0 < J, got j0={j0}, J={J}")
    fp = wavelet_filters(basis)
    details = []
    a = x
    for _ in range(J - j0):
        a, d = _analysis_step(a, fp)
        details.append(d)
    return WaveletCoefficients(j0=j0, J=J, scaling=a, details=details[::-1])


def inverse_dwt(c: WaveletCoefficients, basis: BasisName | str) -> np.ndarray:
    """Exact inverse of :func:`forward_dwt` for the same basis and ``j0``."""
    c.validate()
    fp = wavelet_filters(basis)
    a = np.asarray(c.scaling, dtype=float)
    for d in c.details:
        a = _synthesis_step(a, np.asarray(d, dtype=float), fp)
    return a
