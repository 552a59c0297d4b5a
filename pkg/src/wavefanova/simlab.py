"""Monte Carlo study runner and the summary reports built from it."""
from __future__ import annotations

import csv
import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from itertools import product
from pathlib import Path

import numpy as np

from .car1 import derive_params, simulate_model, stream
from .cochrane_orcutt import FitConfig, estimate_f, fit, random_initial_rhos
from .dwt import BasisName
from .exceptions import ZeroVariance
from .shrinkage import Regime, ShrinkageSpec
from .testfunctions import TestFunctionName, make_test_function, sine_curve

logger = logging.getLogger(__name__)

FIXED_RHOS = (-0.9, -0.7, -0.5, -0.3, -0.1, 0.0, 0.1, 0.3, 0.5, 0.7, 0.9)
STUDY_NS = (512, 1024, 2048, 4096, 8192)
STUDY_SNRS = (1, 3, 7)
STUDY_RHOS = (0.99, 0.9999)

# regime label -> (loop regime, final regime)
REGIMES = {
    "L": (Regime.LINEAR_PROJECTION, Regime.LINEAR_PROJECTION),
    "NT": (Regime.TERM_BY_TERM, Regime.TERM_BY_TERM),
    "NB": (Regime.TERM_BY_TERM, Regime.BLOCK),
}

# purpose slot of the RNG key
_DATA, _STARTS = 0, 1


def scale_to_snr(f, sigma_p: float, target_snr: float) -> np.ndarray:
    """Rescale ``f`` so that sd(f) / sigma_p equals ``target_snr``."""
    f = np.asarray(f, dtype=float)
    sd = np.std(f, ddof=1)
    if not sd > 0:
        raise ZeroVariance("cannot rescale a constant function")
    if not sigma_p > 0:
        raise ValueError("sigma_p must be positive")
    return f * (target_snr * sigma_p / sd)


def imse(f_hat, f) -> float:
    f_hat = np.asarray(f_hat, dtype=float)
    f = np.asarray(f, dtype=float)
    if f_hat.shape != f.shape:
        raise ValueError(f"length mismatch: {f_hat.shape} vs {f.shape}")
    return float(np.mean((f_hat - f) ** 2))


@dataclass(frozen=True)
class StudyConfig:
    functions: tuple[str, ...] = ("doppler",)
    ns: tuple[int, ...] = (1024,)
    snrs: tuple[float, ...] = (7,)
    rhos: tuple[float, ...] = (0.99,)
    bases: tuple[str, ...] = ("db6",)
    regimes: tuple[str, ...] = ("L", "NT", "NB")
    replications: int = 100
    n_starts: int = 50
    master_seed: int = 0
    sigma2: float = 1.0
    tol: float = 1e-15
    max_iter: int = 250
    loop_levels: tuple[int, int] | None = None
    final_levels: tuple[int, int] | None = None
    rank_study: bool = False
    rank_n: int = 1024
    rank_snr: float = 7
    rank_rho: float = 0.99
    rank_basis: str = "db6"
    rank_loop_levels: tuple[int, int] = (4, 7)
    rank_final_levels: tuple[int, int] = (5, 7)
    rank_replications: int | None = None

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        object.__setattr__(self, "functions",
                           tuple(TestFunctionName.parse(f).value for f in self.functions))
        object.__setattr__(self, "bases", tuple(BasisName.parse(b).value for b in self.bases))
        for r in self.regimes:
            if r not in REGIMES:
                raise ValueError(f"unknown regime {r!r}; expected one of {list(REGIMES)}")
        for rho in self.rhos:
            if not 0 < rho < 1:
                raise ValueError(f"rho must lie in (0, 1), got {rho}")


@dataclass(frozen=True)
class StudyRecord:
    function: str
    n: int
    snr: float
    rho: float
    basis: str
    regime: str
    replication: int
    rho_hat: float
    rho_bias: float
    rho_sqerr: float
    imse_f: float
    iterations: int
    converged: bool


@dataclass
class StudyResult:
    records: list[StudyRecord]
    failures: list[tuple] = field(default_factory=list)
    ranks: np.ndarray | None = None


def data_key(function: str, n: int, snr: float, rho: float) -> int:
    """Stable stream id for a data cell; the basis is not part of it, so all
    bases see the same replications."""
    return zlib.crc32(f"{function}|{int(n)}|{float(snr)!r}|{float(rho)!r}".encode())


def make_replication(function, n: int, snr: float, rho: float, sigma2: float,
                     seed: int, replication: int):
    """True curve and observations for one replication of one cell."""
    params = derive_params(rho, sigma2, n)
    f = scale_to_snr(make_test_function(function, n), params.sigma_p, snr)
    key = data_key(TestFunctionName.parse(function).value, n, snr, rho)
    y = simulate_model(f, params, stream(seed, key, replication, _DATA))
    return f, y


def _starts(cfg: StudyConfig, key: int, replication: int):
    return random_initial_rhos(cfg.n_starts, cfg.master_seed, key, replication, _STARTS)


def _run_task(task):
    cfg, function, n, snr, rho, replication = task
    try:
        f, y = make_replication(function, n, snr, rho, cfg.sigma2, cfg.master_seed, replication)
        starts = _starts(cfg, data_key(function, n, snr, rho), replication)
        out = []
        for basis in cfg.bases:
            done_loops = {}
            for label in cfg.regimes:
                loop_regime, final_regime = REGIMES[label]
                final_spec = ShrinkageSpec(regime=final_regime, levels=cfg.final_levels)
                if loop_regime not in done_loops:
                    fc = FitConfig(basis=basis,
                                   loop_shrinkage=ShrinkageSpec(regime=loop_regime,
                                                                levels=cfg.loop_levels),
                                   final_shrinkage=final_spec, initial_rhos=starts,
                                   tol=cfg.tol, max_iter=cfg.max_iter)
                    res = fit(y, fc)
                    done_loops[loop_regime] = res
                    f_hat = res.f_hat
                else:
                    res = done_loops[loop_regime]
                    f_hat, _ = estimate_f(y, res.rho_hat, BasisName.parse(basis), final_spec)
                out.append(StudyRecord(
                    function=function, n=n, snr=snr, rho=rho, basis=basis, regime=label,
                    replication=replication, rho_hat=res.rho_hat,
                    rho_bias=res.rho_hat - rho, rho_sqerr=(res.rho_hat - rho) ** 2,
                    imse_f=imse(f_hat, f), iterations=res.iterations,
                    converged=res.converged))
        return out, None
    except Exception as exc:  # recorded, never aborts the study
        return [], (function, n, snr, rho, replication, f"{type(exc).__name__}: {exc}")


def rank_replication(cfg: StudyConfig, replication: int) -> np.ndarray:
    """IMSE ranks of the 11 fixed-rho pipelines and the adaptive one.

    Returns 12 ranks ordered as ``FIXED_RHOS + (adaptive,)``; rank 12 is the
    smallest IMSE and ties go to the lower competitor index.
    """
    n, snr, rho = cfg.rank_n, cfg.rank_snr, cfg.rank_rho
    params = derive_params(rho, cfg.sigma2, n)
    f = scale_to_snr(sine_curve(n), params.sigma_p, snr)
    key = data_key("sine", n, snr, rho)
    y = simulate_model(f, params, stream(cfg.master_seed, key, replication, _DATA))
    basis = BasisName.parse(cfg.rank_basis)
    final = ShrinkageSpec(regime=Regime.TERM_BY_TERM, levels=cfg.rank_final_levels)
    errors = [imse(estimate_f(y, r, basis, final)[0], f) for r in FIXED_RHOS]
    fc = FitConfig(basis=basis,
                   loop_shrinkage=ShrinkageSpec(regime=Regime.TERM_BY_TERM,
                                                levels=cfg.rank_loop_levels),
                   final_shrinkage=final,
                   initial_rhos=random_initial_rhos(cfg.n_starts, cfg.master_seed, key,
                                                    replication, _STARTS),
                   tol=cfg.tol, max_iter=cfg.max_iter)
    errors.append(imse(fit(y, fc).f_hat, f))
    return competitor_ranks(np.array(errors))


def competitor_ranks(errors: np.ndarray) -> np.ndarray:
    """Rank 1..k with the smallest error getting k; ties favour lower index."""
    errors = np.asarray(errors, dtype=float)
    idx = np.arange(errors.size)
    order = np.lexsort((-idx, -errors))  # worst first; among ties the higher index first
    ranks = np.empty(errors.size, dtype=int)
    ranks[order] = np.arange(1, errors.size + 1)
    return ranks


def _rank_task(args):
    cfg, replication = args
    return rank_replication(cfg, replication)


def _tasks(cfg: StudyConfig):
    for function, n, snr, rho in product(cfg.functions, cfg.ns, cfg.snrs, cfg.rhos):
        for rep in range(cfg.replications):
            yield (cfg, function, n, snr, rho, rep)


def _map(func, tasks, jobs: int):
    tasks = list(tasks)
    if jobs <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def run_study(cfg: StudyConfig, jobs: int = 1) -> StudyResult:
    """Full factorial over the configured grid; order-independent results."""
    records, failures = [], []
    for recs, failure in _map(_run_task, _tasks(cfg), jobs):
        records.extend(recs)
        if failure is not None:
            failures.append(failure)
            logger.warning("cell failure: %s", failure)
    ranks = None
    if cfg.rank_study:
        reps = cfg.rank_replications or cfg.replications
        ranks = np.array(_map(_rank_task, [(cfg, r) for r in range(reps)], jobs))
    return StudyResult(records=records, failures=failures, ranks=ranks)


# ---- reports --------------------------------------------------------------

_CELL = ("function", "n", "snr", "rho", "basis", "regime")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


def _write(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _group(records):
    cells: dict[tuple, list[StudyRecord]] = {}
    for r in records:
        cells.setdefault(tuple(getattr(r, k) for k in _CELL), []).append(r)
    return dict(sorted(cells.items(), key=lambda kv: tuple(map(str, kv[0]))))


def summarize(records):
    """Per-cell ρ̂ bias/MSE and mean IMSE as a list of dict rows."""
    rows = []
    for cell, recs in _group(records).items():
        rows.append(dict(zip(_CELL, cell)) | {
            "bias": float(np.mean([r.rho_bias for r in recs])),
            "mse": float(np.mean([r.rho_sqerr for r in recs])),
            "mean_iters": float(np.mean([r.iterations for r in recs])),
            "frac_converged": float(np.mean([r.converged for r in recs])),
            "mean_imse": float(np.mean([r.imse_f for r in recs])),
            "replications": len(recs),
        })
    return rows


def best_counts(summary):
    """Counts of best performance per (function, rho), as in an overview table.

    For every (n, snr) pair the best basis is found by smallest |bias|,
    smallest MSE and smallest IMSE; ``NL_beats_L`` counts pairs where the
    nonlinear loop has smaller ρ̂ MSE than the linear loop and
    ``NB_beats_NT`` pairs where block finals have smaller IMSE.
    """
    out = []
    keyed: dict[tuple, dict] = {}
    for row in summary:
        keyed.setdefault((row["function"], row["rho"]), {}).setdefault(
            (row["n"], row["snr"]), []).append(row)
    for (function, rho), pairs in sorted(keyed.items(), key=lambda kv: str(kv[0])):
        counts: dict[tuple[str, str], int] = {}

        def bump(criterion, winner):
            counts[(criterion, winner)] = counts.get((criterion, winner), 0) + 1

        for rows in pairs.values():
            nl = [r for r in rows if r["regime"] in ("NT", "NB")]
            lin = [r for r in rows if r["regime"] == "L"]
            if nl and lin:
                bump("NL_beats_L", "yes" if min(r["mse"] for r in nl)
                     < min(r["mse"] for r in lin) else "no")
            nb = {r["basis"]: r for r in rows if r["regime"] == "NB"}
            nt = {r["basis"]: r for r in rows if r["regime"] == "NT"}
            if nb and nt:
                bump("NB_beats_NT", "yes" if min(r["mean_imse"] for r in nb.values())
                     < min(r["mean_imse"] for r in nt.values()) else "no")
            pool = nl or rows
            for criterion, key in (("smallest_bias", lambda r: abs(r["bias"])),
                                   ("smallest_mse", lambda r: r["mse"]),
                                   ("smallest_imse", lambda r: r["mean_imse"])):
                bump(criterion, min(pool, key=key)["basis"])
        for (criterion, winner), count in sorted(counts.items()):
            out.append((function, rho, criterion, winner, count))
    return out


def write_reports(result: StudyResult, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    records = sorted(result.records, key=lambda r: (tuple(str(getattr(r, k)) for k in _CELL),
                                                    r.replication))
    summary = summarize(records)

    paths["records"] = out / "records.csv"
    names = [f.name for f in fields(StudyRecord)]
    _write(paths["records"], names, ([getattr(r, k) for k in names] for r in records))

    paths["rho_summary"] = out / "rho_summary.csv"
    cols = list(_CELL) + ["bias", "mse", "mean_iters", "frac_converged"]
    _write(paths["rho_summary"], cols, ([row[c] for c in cols] for row in summary))

    paths["imse_summary"] = out / "imse_summary.csv"
    cols = list(_CELL) + ["mean_imse"]
    _write(paths["imse_summary"], cols, ([row[c] for c in cols] for row in summary))

    paths["best_counts"] = out / "best_counts.csv"
    _write(paths["best_counts"], ["function", "rho", "criterion", "winner", "count"],
           best_counts(summary))

    paths["ranks"] = out / "ranks.csv"
    _write(paths["ranks"], ["competitor", "mean_rank", "median_rank",
                            "mean_rank_best_is_1", "median_rank_best_is_1"],
           rank_table(result.ranks))

    paths["failures"] = out / "failures.csv"
    _write(paths["failures"], ["function", "n", "snr", "rho", "replication", "error"],
           result.failures)
    return paths


def rank_table(ranks):
    if ranks is None or len(ranks) == 0:
        return []
    ranks = np.asarray(ranks)
    k = ranks.shape[1]
    names = [f"fixed_{r:+.1f}" for r in FIXED_RHOS] + ["adaptive"]
    rows = []
    for i, name in enumerate(names[:k]):
        col = ranks[:, i]
        rows.append((name, col.mean(), np.median(col), (k + 1 - col).mean(),
                     np.median(k + 1 - col)))
    return rows


def study_config_dict(cfg: StudyConfig) -> dict:
    return asdict(cfg)


def with_overrides(cfg: StudyConfig, **kw) -> StudyConfig:
    return replace(cfg, **kw)
