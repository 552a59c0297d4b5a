"""Noise estimation and the three wavelet estimation regimes.

All denoisers transform along the last axis, so a stack of series (for
instance one row per Cochrane-Orcutt start) is handled in one call.
``sigma`` may then be a scalar or one value per row.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from math import ceil, log

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .dwt import BasisName, WaveletCoefficients, dyadic_level, forward_dwt, inverse_dwt
from .exceptions import BadLevelRange

MAD_CONSTANT = 0.6745
BLOCK_LAMBDA = 4.50524


class Regime(str, enum.Enum):
    LINEAR_PROJECTION = "linear"
    TERM_BY_TERM = "term"
    BLOCK = "block"


class SigmaMethod(str, enum.Enum):
    MAD = "mad"
    STD = "std"


# n -> (projection level, first thresholded level, last thresholded level)
_LEVEL_SCHEDULE = {
    512: (5, 4, 7),
    1024: (6, 4, 7),
    2048: (6, 4, 7),
    4096: (7, 5, 8),
    8192: (7, 5, 8),
}


def default_projection_level(n: int) -> int:
    J = dyadic_level(n)
    if n in _LEVEL_SCHEDULE:
        return _LEVEL_SCHEDULE[n][0]
    return max(0, min(J - 1, J // 2 + 1))


def default_threshold_levels(n: int) -> tuple[int, int]:
    """Inclusive detail-level range shrunk by the nonlinear regimes.

    Sample sizes outside the tabulated five use ``(J//2 + 1, J - 2)``,
    clipped to the valid range.
    """
    J = dyadic_level(n)
    if n in _LEVEL_SCHEDULE:
        return _LEVEL_SCHEDULE[n][1:]
    lo, hi = J // 2 + 1, max(0, J - 2)
    return min(lo, hi), hi


@dataclass(frozen=True)
class ShrinkageSpec:
    """How a (prewhitened) series is turned into a function estimate.

    ``levels`` is an inclusive ``(lo, hi)`` range for the nonlinear regimes;
    ``None`` picks the default schedule for the series length.  Likewise a
    ``projection_level`` of ``None`` picks the default ``V_j``.
    """

    regime: Regime = Regime.TERM_BY_TERM
    projection_level: int | None = None
    levels: tuple[int, int] | None = None
    sigma_method: SigmaMethod = SigmaMethod.MAD
    block_length: int | None = None
    block_lambda: float = BLOCK_LAMBDA

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        object.__setattr__(self, "sigma_method", SigmaMethod(self.sigma_method))
        if self.levels is not None:
            lo, hi = self.levels
            if lo > hi or lo < 0:
                raise BadLevelRange(f"bad threshold level range {self.levels}")
            object.__setattr__(self, "levels", (int(lo), int(hi)))

    @property
    def is_linear(self) -> bool:
        return self.regime is Regime.LINEAR_PROJECTION

    def resolved_levels(self, n: int) -> tuple[int, int]:
        J = dyadic_level(n)
        lo, hi = self.levels if self.levels is not None else default_threshold_levels(n)
        if hi > J - 1:
            raise BadLevelRange(f"threshold levels {lo}..{hi} exceed J-1 = {J - 1}")
        return lo, hi

    def resolved_projection(self, n: int) -> int:
        J = dyadic_level(n)
        j = self.projection_level if self.projection_level is not None \
            else default_projection_level(n)
        if not 0 <= j < J:
            raise BadLevelRange(f"projection level {j} must lie in [0, {J - 1}]")
        return j

    def apply(self, y, basis, sigma=None):
        """Run the configured regime on ``y`` (``sigma`` estimated if omitted)."""
        y = np.asarray(y, dtype=float)
        n = y.shape[-1]
        if self.is_linear:
            return denoise_linear(y, basis, self.resolved_projection(n))
        if sigma is None:
            sigma = estimate_sigma(forward_dwt(y, basis, dyadic_level(n) - 1), self.sigma_method)
        levels = self.resolved_levels(n)
        if self.regime is Regime.TERM_BY_TERM:
            return denoise_term_by_term(y, basis, levels, sigma)
        return denoise_block(y, basis, levels, sigma,
                             block_length=self.block_length, lam=self.block_lambda)


def estimate_sigma(c: WaveletCoefficients, method: SigmaMethod | str = SigmaMethod.MAD):
    """Noise sd from the finest detail level (per row for batched pyramids)."""
    d = np.asarray(c.finest)
    if SigmaMethod(method) is SigmaMethod.MAD:
        out = np.median(np.abs(d), axis=-1) / MAD_CONSTANT
    else:
        out = np.std(d, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def _check_levels(levels, J: int) -> tuple[int, int]:
    lo, hi = levels
    if not 0 <= lo <= hi <= J - 1:
        raise BadLevelRange(f"levels {lo}..{hi} outside [0, {J - 1}]")
    return lo, hi


def _row_sigma(sigma, shape) -> np.ndarray:
    s = np.asarray(sigma, dtype=float)
    return s.reshape(s.shape + (1,)) if s.ndim else s


def denoise_linear(y, basis, proj_level: int) -> np.ndarray:
    """Orthogonal projection onto V_{proj_level}."""
    y = np.asarray(y, dtype=float)
    J = dyadic_level(y.shape[-1])
    if not 0 <= proj_level < J:
        raise BadLevelRange(f"projection level {proj_level} must lie in [0, {J - 1}]")
    c = forward_dwt(y, basis, proj_level)
    c.details = [np.zeros_like(d) for d in c.details]
    return inverse_dwt(c, basis)


def hard_threshold(d: np.ndarray, lam) -> np.ndarray:
    # ties |d| == lam are killed
    return np.where(np.abs(d) > lam, d, 0.0)


def denoise_term_by_term(y, basis, levels, sigma) -> np.ndarray:
    """Hard thresholding at sigma * sqrt(2 ln n) on the detail levels in ``levels``."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    J = dyadic_level(n)
    lo, hi = _check_levels(levels, J)
    lam = _row_sigma(sigma, y.shape) * np.sqrt(2.0 * log(n))
    c = forward_dwt(y, basis, lo)
    for j in range(lo, hi + 1):
        c.details[j - lo] = hard_threshold(c.details[j - lo], lam)
    return inverse_dwt(c, basis)


def block_shrink(d: np.ndarray, sigma, block_length: int, lam: float = BLOCK_LAMBDA) -> np.ndarray:
    """James-Stein shrinkage of contiguous blocks along the last axis.

    When the level length is not a multiple of ``block_length`` the last
    block wraps around to the start of the level; wrapped coefficients keep
    the factor of the first block they belong to.
    """
    d = np.asarray(d, dtype=float)
    m = d.shape[-1]
    L = min(block_length, m)
    n_blocks = -(-m // L)
    idx = np.arange(n_blocks * L) % m
    blocks = d[..., idx].reshape(d.shape[:-1] + (n_blocks, L))
    energy = np.sum(blocks ** 2, axis=-1)
    s2 = _row_sigma(sigma, d.shape) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(energy > 0, 1.0 - lam * L * s2 / energy, 0.0)
    factor = np.clip(factor, 0.0, None)
    per_coef = np.repeat(factor, L, axis=-1)[..., :m]
    return d * per_coef


def block_length_for(n: int) -> int:
    return max(1, ceil(log(n)))


def denoise_block(y, basis, levels, sigma, block_length: int | None = None,
                  lam: float = BLOCK_LAMBDA) -> np.ndarray:
    """BlockJS shrinkage with blocks of length ceil(ln n) on ``levels``."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    J = dyadic_level(n)
    lo, hi = _check_levels(levels, J)
    L = block_length or block_length_for(n)
    c = forward_dwt(y, basis, lo)
    for j in range(lo, hi + 1):
        c.details[j - lo] = block_shrink(c.details[j - lo], sigma, L, lam)
    return inverse_dwt(c, basis)


class WaveletShrinkage(TransformerMixin, BaseEstimator):
    """Stateless wavelet denoiser; each row of ``X`` is one dyadic series.

    Parameters
    ----------
    basis : {"db3", "db6", "sym8"}
    regime : {"linear", "term", "block"}
    levels : (lo, hi) or None
        Detail levels shrunk by the nonlinear regimes.
    projection_level : int or None
        Target ``V_j`` for the linear regime.
    sigma : float or None
        Noise sd; estimated per row from the finest level when None.
    sigma_method : {"mad", "std"}
    """

    def __init__(self, basis="db6", regime="term", levels=None, projection_level=None,
                 sigma=None, sigma_method="mad"):
        self.basis = basis
        self.regime = regime
        self.levels = levels
        self.projection_level = projection_level
        self.sigma = sigma
        self.sigma_method = sigma_method

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_features=2)
        dyadic_level(X.shape[1])
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = check_array(X, ensure_min_features=2)
        spec = ShrinkageSpec(regime=self.regime, projection_level=self.projection_level,
                             levels=self.levels, sigma_method=self.sigma_method)
        return spec.apply(X, BasisName.parse(self.basis), self.sigma)
