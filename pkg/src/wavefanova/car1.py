"""CAR(1) / Ornstein-Uhlenbeck error model sampled at spacing h = 1/n."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateSeries, OutOfModelRange

RHO_CLAMP = 1.0 - 1e-9


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``.

    The key is typically ``(cell, replication, purpose)``.  Streams are derived
    with ``SeedSequence`` spawn keys, so the draws for a given key never depend
    on which other streams were created or in what order.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class Signal:
    """Equally spaced real samples with their time origin and spacing."""

    samples: np.ndarray
    origin_time: float = 0.0
    dt: float = 1.0

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 1:
            raise ValueError("Signal samples must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise ValueError("Signal contains NaN or infinite samples")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "samples", arr)

    def __array__(self, dtype=None, copy=None):
        return self.samples if dtype is None else self.samples.astype(dtype)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class Car1Params:
    rho: float
    alpha: float
    sigma2: float
    n: int
    sigma_p2: float = field(init=False)
    sigma_u2: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "sigma_p2", self.sigma2 / (2.0 * self.alpha))
        object.__setattr__(self, "sigma_u2", self.sigma_p2 * (1.0 - self.rho ** 2))

    @property
    def sigma_p(self) -> float:
        return float(np.sqrt(self.sigma_p2))


def alpha_from_rho(rho: float, n: int) -> float:
    """Mean-reversion rate ``alpha = -n log(rho)``."""
    if not 0.0 < rho < 1.0:
        raise OutOfModelRange(f"rho must lie in (0, 1), got {rho}")
    if n < 1:
        raise OutOfModelRange("n must be a positive integer")
    return -n * float(np.log(rho))


def rho_from_alpha(alpha: float, n: int) -> float:
    return float(np.exp(-alpha / n))


def derive_params(rho: float, sigma2: float, n: int) -> Car1Params:
    if not sigma2 > 0:
        raise OutOfModelRange("sigma2 must be positive")
    return Car1Params(rho=rho, alpha=alpha_from_rho(rho, n), sigma2=sigma2, n=n)


def simulate_car1(params: Car1Params, length: int, seed=None) -> np.ndarray:
    """Stationary AR(1) path: eps_0 ~ N(0, sigma_p2), eps_t = rho eps_{t-1} + u_t.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else stream(0 if seed is None else seed)
    draws = rng.standard_normal(length)
    return _ar1_filter(draws, params.rho, np.sqrt(params.sigma_p2), np.sqrt(params.sigma_u2))


def _ar1_filter(draws: np.ndarray, rho: float, sd0: float, sd_u: float) -> np.ndarray:
    from scipy.signal import lfilter

    x = draws * sd_u
    x[0] = draws[0] * sd0
    return lfilter([1.0], [1.0, -rho], x)


def simulate_model(f, params: Car1Params, seed=None) -> np.ndarray:
    """Observations ``y = f + eps`` with CAR(1) errors."""
    f = np.asarray(f, dtype=float)
    return f + simulate_car1(params, len(f), seed)


def estimate_rho_lag1(y) -> float:
    """Conditional least-squares lag-1 estimate sum y_t y_{t-1} / sum y_{t-1}^2."""
    y = np.asarray(y, dtype=float)
    if len(y) < 3:
        raise ValueError("need at least 3 samples")
    den = np.dot(y[:-1], y[:-1])
    if den == 0:
        raise DegenerateSeries("lagged series has zero energy")
    return float(np.dot(y[1:], y[:-1]) / den)


def estimate_rho_residuals(e) -> float:
    """Residual-based estimate sum_{t>=2} e_t e_{t-1} / sum_{t>=2} e_t^2.

    The result is clamped into the open unit interval; an all-zero residual
    series gives 0.  Batched input (leading axes) is supported.
    """
    e = np.asarray(e, dtype=float)
    if e.shape[-1] < 3:
        raise ValueError("need at least 3 samples")
    num = np.sum(e[..., 1:] * e[..., :-1], axis=-1)
    den = np.sum(e[..., 1:] ** 2, axis=-1)
    degenerate = den < 1e-300
    rho = np.where(degenerate, 0.0, num / np.where(degenerate, 1.0, den))
    rho = np.clip(rho, -RHO_CLAMP, RHO_CLAMP)
    return float(rho) if rho.ndim == 0 else rho


def fisher_information(rho: float, sigma_u2: float, n: int) -> np.ndarray:
    """Fisher information for (f_t, rho, sigma_u^2); block diagonal."""
    if not -1.0 < rho < 1.0 or not sigma_u2 > 0 or n < 2:
        raise OutOfModelRange("need |rho| < 1, sigma_u2 > 0 and n >= 2")
    r2 = rho * rho
    info = np.zeros((3, 3))
    info[0, 0] = (1.0 - r2 + (n - 1) * (1.0 - rho) ** 2) / sigma_u2
    info[1, 1] = (n - 1 + (3 - n) * r2) / (1.0 - r2) ** 2
    info[1, 2] = info[2, 1] = 1.0 / (sigma_u2 * (1.0 - r2))
    info[2, 2] = n / (2.0 * sigma_u2 ** 2)
    return info
