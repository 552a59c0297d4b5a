"""FANOVA decomposition and wavelet tests of functional hypotheses.

The tests work on empirical wavelet coefficients theta_jk with noise level
``eta`` (for n samples of white noise with sd sigma, eta = sigma / sqrt(n)).
Coarse levels j_min..j(s)-1 enter a centered energy statistic T; finer
levels j(s)..J-1 enter a thresholded statistic Q, centered by its null mean
so that T + Q has mean zero under H0.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from math import ceil, log, sqrt

import numpy as np
from scipy.stats import chi2, norm
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array

from .dwt import BasisName, WaveletCoefficients, dyadic_level, forward_dwt
from .exceptions import BadLevelRange, EtaOutOfRange, NeedTwoCurves
from .shrinkage import MAD_CONSTANT


class Branch(str, enum.Enum):
    P_GE_2 = "p2"
    P_IN_1_2 = "p12"
    ADAPTIVE_GENERAL = "adaptive"
    ADAPTIVE_P_GE_2 = "adaptive_p2"

    @property
    def adaptive(self) -> bool:
        return self in (Branch.ADAPTIVE_GENERAL, Branch.ADAPTIVE_P_GE_2)

    @property
    def uses_q(self) -> bool:
        return self in (Branch.P_IN_1_2, Branch.ADAPTIVE_GENERAL)


@dataclass(frozen=True)
class TestConfig:
    """Level, smoothness class and resolution settings for the tests.

    ``eta=None`` means "estimate from the data" where the caller supports it.
    """

    alpha: float = 0.05
    besov_p: float = 2.0
    besov_q: float = 2.0
    besov_s: float = 1.0
    besov_C: float = 1.0
    j_min: int = 3
    eta: float | None = None
    branch: Branch = Branch.P_IN_1_2
    basis: BasisName = BasisName.DB6
    adaptive_critical: str = "asymptotic"

    __test__ = False

    def __post_init__(self):
        object.__setattr__(self, "branch", Branch(self.branch))
        object.__setattr__(self, "basis", BasisName.parse(self.basis))
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.besov_p < 1 or self.besov_q < 1:
            raise ValueError("Besov p and q must be >= 1")
        if not self.besov_s > 1 / self.besov_p:
            raise ValueError("need s > 1/p")
        if self.j_min < 0:
            raise BadLevelRange("j_min must be >= 0")
        if self.adaptive_critical not in ("asymptotic", "monte_carlo"):
            raise ValueError("adaptive_critical must be 'asymptotic' or 'monte_carlo'")


@dataclass
class TestOutcome:
    statistic: float
    critical_value: float
    reject: bool
    j_used: int
    components: dict = field(default_factory=dict)

    __test__ = False


@dataclass
class FanovaDecomposition:
    m0: float
    mu: np.ndarray
    a: np.ndarray
    gamma: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.m0 + self.mu[None, :] + self.a[:, None] + self.gamma


def decompose(curves) -> FanovaDecomposition:
    """Split an r x n matrix of curves into m0 + mu(t) + a_i + gamma_i(t)."""
    f = np.asarray(curves, dtype=float)
    if f.ndim != 2 or f.shape[0] < 2:
        raise NeedTwoCurves("need an r x n matrix with r >= 2")
    m0 = float(f.mean())
    a = f.mean(axis=1) - m0
    mu = f.mean(axis=0) - m0
    gamma = f - m0 - a[:, None] - mu[None, :]
    return FanovaDecomposition(m0=m0, mu=mu, a=a, gamma=gamma)


# ---- statistics -----------------------------------------------------------

def level_threshold(j: int) -> float:
    """lambda_j = sqrt(2 ln 2^j)."""
    return sqrt(2.0 * j * log(2.0))


def _tail_moments(lam: float) -> tuple[float, float]:
    """Mean and variance of X^2 1{|X| > lam} for X ~ N(0, 1)."""
    phi, tail = norm.pdf(lam), norm.sf(lam)
    m2 = 2.0 * (lam * phi + tail)
    m4 = 2.0 * ((lam ** 3 + 3.0 * lam) * phi + 3.0 * tail)
    return m2, m4 - m2 ** 2


def resolution_split(cfg: TestConfig, J: int) -> int:
    """j(s) = ceil(J * 2s' / (2s' + 1)) clipped to [j_min + 1, J - 1].

    s' = s for p >= 2 and s + 1/2 - 1/p for 1 <= p < 2.
    """
    p, s = cfg.besov_p, cfg.besov_s
    s_eff = s if p >= 2 else s + 0.5 - 1.0 / p
    j = ceil(J * 2 * s_eff / (2 * s_eff + 1))
    return int(min(max(j, cfg.j_min + 1), J - 1))


def compute_components(c: WaveletCoefficients, eta: float, j_s: int, j_min: int) -> dict:
    """T, Q and their null standard deviations v0, w0 for split level ``j_s``.

    Returns a dict with keys ``T``, ``Q``, ``v0``, ``w0`` and ``q_center``
    (the null mean already subtracted from Q).
    """
    J = c.J
    if not c.j0 <= j_min <= j_s <= J:
        raise BadLevelRange(f"need {c.j0} <= j_min={j_min} <= j_s={j_s} <= J={J}")
    eta2 = eta * eta
    T = 0.0
    for j in range(j_min, j_s):
        d = c.level(j)
        T += float(np.sum(d * d) - d.size * eta2)
    v0 = sqrt(2.0 * eta2 * eta2 * (2 ** j_s - 2 ** j_min))
    Q, q_center, w0sq = 0.0, 0.0, 0.0
    for j in range(j_s, J):
        d = c.level(j)
        lam = level_threshold(j)
        m2, var = _tail_moments(lam)
        kept = np.abs(d) > eta * lam
        Q += float(np.sum(d[kept] ** 2))
        q_center += d.size * eta2 * m2
        w0sq += d.size * eta2 * eta2 * var
    return {"T": T, "Q": Q - q_center, "v0": v0, "w0": sqrt(w0sq), "q_center": q_center}


def _z(alpha: float) -> float:
    return float(norm.ppf(1.0 - alpha))


def nonadaptive_test(c: WaveletCoefficients, cfg: TestConfig, eta: float | None = None) -> TestOutcome:
    """Fixed-resolution test; ``eta`` overrides ``cfg.eta``."""
    if cfg.branch.adaptive:
        raise ValueError("nonadaptive_test needs branch p2 or p12")
    eta = cfg.eta if eta is None else eta
    if eta is None:
        raise ValueError("noise level eta is required")
    j_s = resolution_split(cfg, c.J)
    comp = compute_components(c, eta, j_s, cfg.j_min)
    z = _z(cfg.alpha)
    if cfg.branch is Branch.P_GE_2:
        stat, crit = comp["T"], comp["v0"] * z
    else:
        stat, crit = comp["T"] + comp["Q"], sqrt(comp["v0"] ** 2 + comp["w0"] ** 2) * z
    return TestOutcome(statistic=stat, critical_value=crit, reject=bool(stat > crit),
                       j_used=j_s, components=comp)


def adaptive_threshold(eta: float) -> float:
    """sqrt(2 ln ln eta^-2); requires eta < e^{-1/2}."""
    if not 0 < eta < np.exp(-0.5):
        raise EtaOutOfRange(f"eta={eta} too large for the double-log threshold")
    return sqrt(2.0 * log(log(eta ** -2)))


def _level_terms(c: WaveletCoefficients, eta: float, j_min: int):
    """Per-level pieces (T part, v0^2 part, centered Q part, w0^2 part)."""
    eta2 = eta * eta
    rows = []
    for j in range(j_min, c.J):
        d = c.level(j)
        lam = level_threshold(j)
        m2, var = _tail_moments(lam)
        sq = d * d
        rows.append((float(sq.sum() - d.size * eta2),
                     2.0 * eta2 * eta2 * d.size,
                     float(sq[np.abs(d) > eta * lam].sum() - d.size * eta2 * m2),
                     d.size * eta2 * eta2 * var))
    return np.array(rows).reshape(-1, 4)


def standardized_statistics(c: WaveletCoefficients, eta: float, j_min: int,
                            use_q: bool) -> dict[int, float]:
    """Standardized statistic for every admissible split level j_min..J-1."""
    terms = _level_terms(c, eta, j_min)
    zero = np.zeros(1)
    t_cum = np.concatenate([zero, np.cumsum(terms[:, 0])])
    v_cum = np.concatenate([zero, np.cumsum(terms[:, 1])])
    q_tail = np.concatenate([np.cumsum(terms[::-1, 2])[::-1], zero])
    w_tail = np.concatenate([np.cumsum(terms[::-1, 3])[::-1], zero])
    out = {}
    for i, j in enumerate(range(j_min, c.J)):
        if use_q:
            num, den = t_cum[i] + q_tail[i], sqrt(v_cum[i] + w_tail[i])
        else:
            num, den = t_cum[i], sqrt(v_cum[i])
        if den > 0:
            out[j] = float(num / den)
    return out


def _max_standardized(levels: list[np.ndarray], eta: float, j_min: int, J: int,
                      use_q: bool) -> tuple[int, float] | None:
    c = WaveletCoefficients(j0=j_min, J=J, scaling=np.zeros(2 ** j_min), details=levels)
    stats = standardized_statistics(c, eta, j_min, use_q)
    if not stats:
        return None
    j_best = max(stats, key=lambda j: (stats[j], -j))
    return j_best, stats[j_best]


@lru_cache(maxsize=32)
def null_max_quantile(J: int, j_min: int, use_q: bool, alpha: float,
                      draws: int = 4000, seed: int = 20040101) -> float:
    """Monte Carlo (1 - alpha) quantile of the adaptive statistic under H0.

    Under H0 with known eta the standardized statistics depend only on
    theta / eta, which are iid N(0, 1), so the quantile is free of eta.
    """
    rng = np.random.default_rng(seed)
    maxima = np.empty(draws)
    for i in range(draws):
        levels = [rng.standard_normal(2 ** j) for j in range(j_min, J)]
        maxima[i] = _max_standardized(levels, 1.0, j_min, J, use_q)[1]
    return float(np.quantile(maxima, 1.0 - alpha))


def adaptive_test(c: WaveletCoefficients, cfg: TestConfig, eta: float | None = None) -> TestOutcome:
    """Maximum of standardized statistics over j(s) in [j_min, J - 1].

    The default critical value is sqrt(2 ln ln eta^-2).  With
    ``cfg.adaptive_critical == "monte_carlo"`` it is replaced by the
    simulated (1 - alpha) null quantile of the maximum.
    """
    eta = cfg.eta if eta is None else eta
    if eta is None:
        raise ValueError("noise level eta is required")
    threshold = adaptive_threshold(eta)
    use_q = cfg.branch is not Branch.ADAPTIVE_P_GE_2 and cfg.branch is not Branch.P_GE_2
    stats = standardized_statistics(c, eta, cfg.j_min, use_q)
    if not stats:
        raise BadLevelRange("no admissible resolution level")
    if cfg.adaptive_critical == "monte_carlo":
        threshold = null_max_quantile(c.J, cfg.j_min, use_q, cfg.alpha)
    j_best = max(stats, key=lambda j: (stats[j], -j))
    return TestOutcome(statistic=stats[j_best], critical_value=threshold,
                       reject=bool(stats[j_best] > threshold), j_used=j_best,
                       components={"per_level": stats})


def run_test(c: WaveletCoefficients, cfg: TestConfig, eta: float | None = None) -> TestOutcome:
    if cfg.branch.adaptive:
        return adaptive_test(c, cfg, eta)
    return nonadaptive_test(c, cfg, eta)


def empirical_coefficients(x, cfg: TestConfig) -> WaveletCoefficients:
    """Wavelet coefficients of the sampled curve ``x``, scaled by 1/sqrt(n)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    J = dyadic_level(n)
    if cfg.j_min >= J:
        raise BadLevelRange(f"j_min={cfg.j_min} must be < J={J}")
    c = forward_dwt(x / sqrt(n), cfg.basis, cfg.j_min)
    return c


def estimate_eta(c: WaveletCoefficients) -> float:
    """MAD noise level of the (already 1/sqrt(n)-scaled) finest details."""
    return float(np.median(np.abs(c.finest)) / MAD_CONSTANT)


def test_curve(x, cfg: TestConfig) -> TestOutcome:
    """Test H0: x is pure noise around a constant."""
    x = np.asarray(x, dtype=float)
    c = empirical_coefficients(x - x.mean(), cfg)
    eta = cfg.eta if cfg.eta is not None else estimate_eta(c)
    out = run_test(c, cfg, eta)
    out.components["eta"] = eta
    return out


def test_constant_difference(z, g, cfg: TestConfig) -> TestOutcome:
    """H0: z - g is constant.  The constant is removed by mean subtraction."""
    z = np.asarray(z, dtype=float)
    g = np.asarray(g, dtype=float)
    if z.shape != g.shape:
        raise ValueError(f"length mismatch: {z.shape} vs {g.shape}")
    return test_curve(z - g, cfg)


def test_main_effects_parametric(d: FanovaDecomposition, noise_var: float,
                                 alpha: float = 0.05) -> TestOutcome:
    """Chi-square test of H0: a_i = 0 for all i; ``noise_var`` is per-sample."""
    r, n = d.gamma.shape
    if r < 2:
        raise NeedTwoCurves("need at least two curves")
    if not noise_var > 0:
        raise ValueError("noise_var must be positive")
    stat = float(n * np.sum(d.a ** 2) / noise_var)
    crit = float(chi2.ppf(1.0 - alpha, r - 1))
    return TestOutcome(statistic=stat, critical_value=crit, reject=bool(stat > crit),
                       j_used=-1, components={"df": r - 1})


test_constant_difference.__test__ = False
test_main_effects_parametric.__test__ = False
test_curve.__test__ = False


class WaveletFanovaTest(BaseEstimator):
    """Decompose r curves and test the time effect, group effects and interactions.

    ``fit(X)`` with ``X`` of shape (r, n) sets ``decomposition_``,
    ``mu_test_``, ``a_test_`` and ``gamma_tests_`` (one per curve, not
    corrected for multiplicity).  ``noise_sd`` is the per-sample noise sd of
    the observed curves; when None it is estimated by MAD from the
    finest-level details of the interaction curves.
    """

    def __init__(self, alpha=0.05, branch="p12", basis="db6", j_min=3, besov_p=2.0,
                 besov_q=2.0, besov_s=1.0, noise_sd=None):
        self.alpha = alpha
        self.branch = branch
        self.basis = basis
        self.j_min = j_min
        self.besov_p = besov_p
        self.besov_q = besov_q
        self.besov_s = besov_s
        self.noise_sd = noise_sd

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=2, ensure_min_features=2)
        r, n = X.shape
        dyadic_level(n)
        d = decompose(X)
        cfg = TestConfig(alpha=self.alpha, besov_p=self.besov_p, besov_q=self.besov_q,
                         besov_s=self.besov_s, j_min=self.j_min, branch=self.branch,
                         basis=self.basis)
        sd = self.noise_sd
        if sd is None:
            fine = [forward_dwt(g, cfg.basis, dyadic_level(n) - 1).finest for g in d.gamma]
            sd = float(np.median(np.abs(np.concatenate(fine))) / MAD_CONSTANT
                       / sqrt(1.0 - 1.0 / r))
        root_n = sqrt(n)
        # per-sample sd of mu-hat and of each gamma-hat row
        eta_mu = sd / sqrt(r) / root_n
        eta_gamma = sd * sqrt(1.0 - 1.0 / r) / root_n
        self.decomposition_ = d
        self.noise_sd_ = sd
        self.mu_test_ = run_test(empirical_coefficients(d.mu, cfg), cfg, eta_mu)
        self.a_test_ = test_main_effects_parametric(d, sd * sd, self.alpha)
        self.gamma_tests_ = [run_test(empirical_coefficients(g, cfg), cfg, eta_gamma)
                             for g in d.gamma]
        self.n_features_in_ = n
        return self
