"""Iterative Cochrane-Orcutt estimation of (rho, f) with wavelet smoothing.

Each iteration prewhitens the data with the current rho, smooths the
whitened series in a wavelet basis, undoes the whitening to get f_hat and
re-estimates rho from the residuals y - f_hat.  All starting values are
iterated together as rows of one array.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, column_or_1d

from .car1 import estimate_rho_residuals, stream
from .dwt import BasisName, dyadic_level, forward_dwt
from .exceptions import NonStationaryRho
from .shrinkage import Regime, ShrinkageSpec, estimate_sigma

logger = logging.getLogger(__name__)

# Residuals this small relative to the data carry no information about rho.
DEGENERATE_RTOL = 1e-9


@dataclass(frozen=True)
class FitConfig:
    basis: BasisName = BasisName.DB6
    loop_shrinkage: ShrinkageSpec = field(default_factory=ShrinkageSpec)
    final_shrinkage: ShrinkageSpec = field(
        default_factory=lambda: ShrinkageSpec(regime=Regime.BLOCK))
    initial_rhos: tuple[float, ...] = (0.0,)
    tol: float = 1e-15
    max_iter: int = 250

    def __post_init__(self):
        object.__setattr__(self, "basis", BasisName.parse(self.basis))
        rhos = tuple(float(r) for r in np.atleast_1d(self.initial_rhos))
        object.__setattr__(self, "initial_rhos", rhos)
        if not rhos:
            raise ValueError("initial_rhos must be nonempty")
        if any(not -1.0 < r < 1.0 for r in rhos):
            raise NonStationaryRho("initial rho values must lie in (-1, 1)")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


def random_initial_rhos(k: int, seed: int, *key: int) -> tuple[float, ...]:
    """``k`` starting values drawn from U(-1, 1) on stream ``(seed, *key)``."""
    draws = stream(seed, *key).uniform(-1.0, 1.0, size=k)
    return tuple(float(np.clip(d, -1 + 1e-12, 1 - 1e-12)) for d in draws)


@dataclass
class FitResult:
    rho_hat: float
    f_hat: np.ndarray
    sigma_u_hat: float
    iterations: int
    converged: bool
    rho_trace: np.ndarray
    per_start_rhos: np.ndarray
    per_start_converged: np.ndarray
    per_start_iterations: np.ndarray
    residual_norms: np.ndarray
    winner: int


def _check_rho(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if np.any(np.abs(rho) >= 1.0):
        raise NonStationaryRho(f"|rho| must be < 1, got {rho}")
    return rho


def prewhiten(y, rho) -> np.ndarray:
    """z_0 = sqrt(1 - rho^2) y_0, z_t = y_t - rho y_{t-1}.

    ``rho`` may be a vector, giving one whitened row per value.
    """
    y = np.asarray(y, dtype=float)
    rho = _check_rho(rho)
    r = rho[..., None] if rho.ndim else rho
    z = np.empty(np.broadcast_shapes(y.shape, np.shape(r)))
    z[..., 1:] = y[..., 1:] - r * y[..., :-1]
    z[..., :1] = np.sqrt(1.0 - r ** 2) * y[..., :1]
    return z


def recolor(g_hat, rho, y0) -> np.ndarray:
    """f_0 = y0, f_t = g_t + rho f_{t-1}; g_0 is ignored."""
    g_hat = np.asarray(g_hat, dtype=float)
    rho = _check_rho(rho)
    if rho.ndim == 0:
        x = g_hat.copy()
        x[..., 0] = y0
        return lfilter([1.0], [1.0, -float(rho)], x, axis=-1)
    out = np.array(g_hat, dtype=float, copy=True)
    out[..., 0] = y0
    for i, r in enumerate(rho):
        out[i] = lfilter([1.0], [1.0, -r], out[i])
    return out


def _innovation_sigma(z: np.ndarray, basis: BasisName, spec: ShrinkageSpec):
    J = dyadic_level(z.shape[-1])
    return estimate_sigma(forward_dwt(z, basis, J - 1), spec.sigma_method)


def estimate_f(y, rho: float, basis: BasisName, spec: ShrinkageSpec):
    """One whiten / smooth / recolor pass at fixed ``rho``; returns (f_hat, sigma_u)."""
    y = np.asarray(y, dtype=float)
    z = prewhiten(y, rho)
    sigma = _innovation_sigma(z, basis, spec)
    g_hat = spec.apply(z, basis, sigma)
    return recolor(g_hat, rho, y[0]), sigma


def _pick_winner(final_rhos: np.ndarray, rss: np.ndarray) -> int:
    best = np.min(rss)
    tied = np.flatnonzero(rss <= best + 1e-12 * max(abs(best), 1e-300))
    return int(tied[np.argmin(np.abs(final_rhos[tied]))])


def fit(y, cfg: FitConfig) -> FitResult:
    """Run the iteration from every start in ``cfg.initial_rhos``.

    Starts are iterated until two consecutive estimates differ by less than
    ``cfg.tol`` or ``cfg.max_iter`` passes.  The reported estimate is the
    start with the smallest final residual sum of squares (ties go to the
    smallest |rho|); f is then re-estimated once with ``cfg.final_shrinkage``.
    Residuals below ``DEGENERATE_RTOL * ||y||`` yield rho = 0.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("fit expects a single one-dimensional series")
    n = len(y)
    dyadic_level(n)
    basis = cfg.basis
    loop = cfg.loop_shrinkage

    k = len(cfg.initial_rhos)
    rho = np.array(cfg.initial_rhos, dtype=float)
    traces = [[r] for r in rho]
    norms = [[] for _ in range(k)]
    done = np.zeros(k, dtype=bool)
    iters = np.zeros(k, dtype=int)
    rss = np.full(k, np.inf)
    floor = (DEGENERATE_RTOL * np.linalg.norm(y)) ** 2

    for _ in range(cfg.max_iter):
        active = np.flatnonzero(~done)
        if active.size == 0:
            break
        r_act = rho[active]
        z = prewhiten(y, r_act)
        sigma = None if loop.is_linear else _innovation_sigma(z, basis, loop)
        g_hat = loop.apply(z, basis, sigma)
        f_hat = recolor(g_hat, r_act, y[0])
        e = y - f_hat
        r_new = np.atleast_1d(estimate_rho_residuals(e))
        sq = np.sum(e ** 2, axis=-1)
        r_new = np.where(sq <= floor, 0.0, r_new)
        for pos, i in enumerate(active):
            traces[i].append(float(r_new[pos]))
            norms[i].append(float(np.sqrt(sq[pos])))
        iters[active] += 1
        rss[active] = sq
        newly = np.abs(r_new - r_act) < cfg.tol
        rho[active] = r_new
        done[active[newly]] = True

    if not done.all():
        logger.info("%d of %d starts hit max_iter=%d", int((~done).sum()), k, cfg.max_iter)

    w = _pick_winner(rho, rss)
    rho_hat = float(rho[w])
    f_final, sigma_u = estimate_f(y, rho_hat, basis, cfg.final_shrinkage)
    return FitResult(
        rho_hat=rho_hat,
        f_hat=f_final,
        sigma_u_hat=float(sigma_u),
        iterations=int(iters[w]),
        converged=bool(done[w]),
        rho_trace=np.array(traces[w]),
        per_start_rhos=rho.copy(),
        per_start_converged=done.copy(),
        per_start_iterations=iters.copy(),
        residual_norms=np.array(norms[w]),
        winner=w,
    )


class CochraneOrcuttWavelet(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit`.

    ``fit(y)`` estimates ``rho_`` and the function ``f_hat_`` from one
    dyadic-length series.  ``transform(y)`` prewhitens a series with the
    fitted ``rho_``; ``inverse_transform(g)`` recolors a whitened series
    starting from the fitted series' first sample.

    Parameters
    ----------
    basis : {"db3", "db6", "sym8"}
    loop_regime : {"linear", "term"}
    final_regime : {"term", "block", "linear"}
    loop_levels, final_levels : (lo, hi) or None
        Detail levels thresholded inside the loop and in the final pass.
    n_starts : int
        Number of U(-1, 1) starting values; ignored if ``initial_rhos`` is given.
    initial_rhos : sequence of float or None
    tol, max_iter : convergence control.
    random_state : int
        Seed for the starting values.
    """

    def __init__(self, basis="db6", loop_regime="term", final_regime="block",
                 loop_levels=None, final_levels=None, n_starts=50, initial_rhos=None,
                 tol=1e-15, max_iter=250, random_state=0):
        self.basis = basis
        self.loop_regime = loop_regime
        self.final_regime = final_regime
        self.loop_levels = loop_levels
        self.final_levels = final_levels
        self.n_starts = n_starts
        self.initial_rhos = initial_rhos
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def _config(self) -> FitConfig:
        rhos = self.initial_rhos
        if rhos is None:
            rhos = random_initial_rhos(self.n_starts, self.random_state)
        return FitConfig(
            basis=self.basis,
            loop_shrinkage=ShrinkageSpec(regime=self.loop_regime, levels=self.loop_levels),
            final_shrinkage=ShrinkageSpec(regime=self.final_regime, levels=self.final_levels),
            initial_rhos=tuple(rhos), tol=self.tol, max_iter=self.max_iter)

    def fit(self, y, X=None):
        y = column_or_1d(y)
        if not np.all(np.isfinite(y)):
            raise ValueError("input contains NaN or infinity")
        result = fit(y, self._config())
        self.result_ = result
        self.rho_ = result.rho_hat
        self.f_hat_ = result.f_hat
        self.sigma_u_ = result.sigma_u_hat
        self.y0_ = float(y[0])
        self.n_features_in_ = len(y)
        return self

    def transform(self, y):
        check_is_fitted(self, "rho_")
        return prewhiten(np.asarray(y, dtype=float), self.rho_)

    def inverse_transform(self, g):
        check_is_fitted(self, "rho_")
        return recolor(g, self.rho_, self.y0_)
