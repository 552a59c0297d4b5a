"""The twelve benchmark curves, sampled at midpoints t_k = (k + 1/2) / n.

Doppler, HeaviSine, Bumps and Blocks are the classic wavelet benchmarks; the
other eight are standard curves from wavelet regression comparisons.
Amplitudes are immaterial downstream because curves are rescaled to a
target SNR.
"""
from __future__ import annotations

import enum

import numpy as np

from .dwt import dyadic_level


class TestFunctionName(str, enum.Enum):
    DOPPLER = "doppler"
    HEAVISINE = "heavisine"
    BUMPS = "bumps"
    BLOCKS = "blocks"
    SPIKES = "spikes"
    BLIP = "blip"
    CORNER = "corner"
    WAVE = "wave"
    ANGLES = "angles"
    PARABOLAS = "parabolas"
    TIME_SHIFTED_SINE = "time_shifted_sine"
    CUSP = "cusp"

    __test__ = False

    @classmethod
    def parse(cls, value) -> "TestFunctionName":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown test function {value!r}") from None


BLOCK_JUMPS = np.array([0.10, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81])
_BLOCK_HEIGHTS = np.array([4, -5, 3, -4, 5, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2])
_BUMP_HEIGHTS = np.array([4, 5, 3, 4, 5, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2])
_BUMP_WIDTHS = np.array([0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005])


def grid(n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) / n


def doppler(t):
    return np.sqrt(t * (1 - t)) * np.sin(2 * np.pi * 1.05 / (t + 0.05))


def heavisine(t):
    return 4 * np.sin(4 * np.pi * t) - np.sign(t - 0.3) - np.sign(0.72 - t)


def bumps(t):
    u = np.abs((t[:, None] - BLOCK_JUMPS) / _BUMP_WIDTHS)
    return np.sum(_BUMP_HEIGHTS / (1 + u) ** 4, axis=1)


def blocks(t):
    return np.sum(_BLOCK_HEIGHTS * (t[:, None] >= BLOCK_JUMPS), axis=1).astype(float)


def spikes(t):
    return 15.6676 * (np.exp(-500 * (t - 0.23) ** 2)
                      + 2 * np.exp(-2000 * (t - 0.33) ** 2)
                      + 4 * np.exp(-8000 * (t - 0.47) ** 2)
                      + 3 * np.exp(-16000 * (t - 0.69) ** 2)
                      + np.exp(-32000 * (t - 0.83) ** 2))


def blip(t):
    left = 0.32 + 0.6 * t + 0.3 * np.exp(-100 * (t - 0.3) ** 2)
    right = -0.28 + 0.6 * t + 0.3 * np.exp(-100 * (t - 1.3) ** 2)
    return np.where(t <= 0.8, left, right)


def corner(t):
    return np.select(
        [t <= 0.5, t <= 0.8],
        [62.387 * 10 * t ** 3 * (1 - 4 * t ** 2),
         187.161 * (0.125 - t ** 3) * t ** 4],
        3708.470441 * (t - 1) ** 3)


def wave(t):
    return 0.5 + 0.2 * np.cos(4 * np.pi * t) + 0.1 * np.cos(24 * np.pi * t)


def angles(t):
    return np.select(
        [t <= 0.15, t <= 0.2, t <= 0.5, t <= 0.6, t <= 0.65, t <= 0.85],
        [2 * t + 0.5,
         -12 * (t - 0.15) + 0.8,
         0.2 + 0 * t,
         6 * (t - 0.5) + 0.2,
         -10 * (t - 0.6) + 0.8,
         -0.5 * (t - 0.65) + 0.3],
        2 * (t - 0.85) + 0.2)


def parabolas(t):
    def r(u):
        return np.where(u >= 0, u ** 2, 0.0)
    return (0.8 - 30 * r(t - 0.1) + 60 * r(t - 0.2) - 30 * r(t - 0.3)
            + 500 * r(t - 0.35) - 1000 * r(t - 0.37) + 1000 * r(t - 0.41)
            - 500 * r(t - 0.43) + 7.5 * r(t - 0.5) - 15 * r(t - 0.7) + 7.5 * r(t - 0.9))


def time_shifted_sine(t):
    u = t
    for _ in range(4):
        u = (1 - np.cos(np.pi * u)) / 2
    return 0.3 * np.sin(3 * np.pi * (u + t)) + 0.5


def cusp(t):
    return np.sqrt(np.abs(t - 0.37))


_FUNCTIONS = {
    TestFunctionName.DOPPLER: doppler,
    TestFunctionName.HEAVISINE: heavisine,
    TestFunctionName.BUMPS: bumps,
    TestFunctionName.BLOCKS: blocks,
    TestFunctionName.SPIKES: spikes,
    TestFunctionName.BLIP: blip,
    TestFunctionName.CORNER: corner,
    TestFunctionName.WAVE: wave,
    TestFunctionName.ANGLES: angles,
    TestFunctionName.PARABOLAS: parabolas,
    TestFunctionName.TIME_SHIFTED_SINE: time_shifted_sine,
    TestFunctionName.CUSP: cusp,
}


def make_test_function(name, n: int) -> np.ndarray:
    """Sample the named curve on the midpoint grid of dyadic size ``n``."""
    dyadic_level(n)
    return _FUNCTIONS[TestFunctionName.parse(name)](grid(n)).astype(float)


def sine_curve(n: int) -> np.ndarray:
    """sin(2 pi t), used by the fixed-rho ranking study."""
    return np.sin(2 * np.pi * grid(n))
