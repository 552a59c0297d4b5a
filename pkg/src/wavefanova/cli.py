"""Command-line front end: ``simulate``, ``fit`` and ``test``.

Exit status is 0 on success and 2 on any usage or data error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from datetime import datetime
from pathlib import Path

import numpy as np

from .cochrane_orcutt import FitConfig, fit, prewhiten, random_initial_rhos
from .exceptions import InsufficientData, WaveFanovaError
from .fanova import Branch, TestConfig, test_constant_difference
from .shrinkage import Regime, ShrinkageSpec
from .simlab import StudyConfig, run_study, write_reports

logger = logging.getLogger("wavefanova")

DEFAULT_SEED = 12345
MIN_SAMPLES = 16


class UsageError(Exception):
    pass


# ---- config ----------------------------------------------------------------

_LIST_KEYS = {"functions": str, "ns": int, "snrs": float, "rhos": float,
              "bases": str, "regimes": str}
_SCALAR_KEYS = {"replications": int, "n_starts": int, "sigma2": float, "tol": float,
                "max_iter": int, "rank_n": int, "rank_snr": float, "rank_rho": float,
                "rank_basis": str, "rank_replications": int, "master_seed": int}
_RANGE_KEYS = ("loop_levels", "final_levels", "rank_loop_levels", "rank_final_levels")
_BOOL_KEYS = ("rank_study",)


def _parse_range(text: str) -> tuple[int, int]:
    parts = text.replace(",", "-").split("-")
    if len(parts) != 2:
        raise UsageError(f"level range must look like 4-7, got {text!r}")
    return int(parts[0]), int(parts[1])


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def parse_config(text: str) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        try:
            if key in _LIST_KEYS:
                out[key] = tuple(_LIST_KEYS[key](v.strip()) for v in value.split(",") if v.strip())
            elif key in _SCALAR_KEYS:
                out[key] = _SCALAR_KEYS[key](value)
            elif key in _RANGE_KEYS:
                out[key] = _parse_range(value)
            elif key in _BOOL_KEYS:
                out[key] = _parse_bool(value)
            else:
                raise UsageError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            raise UsageError(f"line {lineno}: bad value for {key}: {exc}") from None
    return out


def load_study_config(path, seed: int) -> StudyConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    values = parse_config(text)
    values["master_seed"] = seed
    try:
        return StudyConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from None


# ---- series ingestion -------------------------------------------------------

def _parse_time(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return datetime.fromisoformat(text.strip()).timestamp()


def read_series(path, column: str | None = None, time_column: str | None = None,
                n: int | None = None) -> np.ndarray:
    """Read one value column, check ordering and spacing, keep the first n rows.

    Without ``n`` the largest power of two not exceeding the row count is used.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            rows = list(reader)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    if not header:
        raise UsageError(f"{path}: missing header row")
    if column is None:
        column = "value" if "value" in header else header[-1]
    if column not in header:
        raise UsageError(f"{path}: no column {column!r}")
    if time_column is None:
        time_column = next((h for h in ("timestamp", "time", "t") if h in header), None)
    elif time_column not in header:
        raise UsageError(f"{path}: no column {time_column!r}")

    if n is not None and (n < 1 or n & (n - 1)):
        raise UsageError(f"--n must be a power of two, got {n}")
    if n is None:
        if len(rows) < MIN_SAMPLES:
            raise InsufficientData(f"{path}: only {len(rows)} rows")
        n = 1 << (len(rows).bit_length() - 1)
    if len(rows) < max(n, MIN_SAMPLES):
        raise InsufficientData(f"{path}: {len(rows)} rows, need {max(n, MIN_SAMPLES)}")
    rows = rows[:n]

    try:
        values = np.array([float(r[column]) for r in rows])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{path}: non-numeric value: {exc}") from None
    if not np.all(np.isfinite(values)):
        raise UsageError(f"{path}: NaN or infinite values in {column!r}")
    if time_column is not None:
        try:
            times = np.array([_parse_time(r[time_column]) for r in rows])
        except (TypeError, ValueError) as exc:
            raise UsageError(f"{path}: bad timestamp: {exc}") from None
        steps = np.diff(times)
        if np.any(steps <= 0):
            raise UsageError(f"{path}: timestamps are not strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-6, atol=0):
            raise UsageError(f"{path}: unequal spacing (gap in the series)")
    return values


# ---- commands ---------------------------------------------------------------

def _fit_config(args, n_starts_default=5) -> FitConfig:
    starts = random_initial_rhos(args.starts or n_starts_default, args.seed)
    loop = ShrinkageSpec(regime=Regime(args.loop), levels=args.loop_levels)
    final = ShrinkageSpec(regime=Regime(args.final), levels=args.final_levels)
    return FitConfig(basis=args.basis, loop_shrinkage=loop, final_shrinkage=final,
                     initial_rhos=starts, tol=args.tol, max_iter=args.max_iter)


def cmd_simulate(args) -> int:
    if args.seed is None:
        raise UsageError("simulate requires --seed")
    cfg = load_study_config(args.config, args.seed)
    result = run_study(cfg, jobs=args.jobs)
    paths = write_reports(result, args.out)
    print(f"records: {len(result.records)}  failures: {len(result.failures)}")
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def cmd_fit(args) -> int:
    y = read_series(args.input, args.column, args.time_column, args.n)
    res = fit(y, _fit_config(args))
    print(f"rho_hat      {res.rho_hat:.4f}")
    print(f"sigma_u_hat  {res.sigma_u_hat:.6g}")
    print(f"iterations   {res.iterations}")
    print(f"converged    {str(res.converged).lower()}")
    print("start  rho_init  rho_final  iterations  converged")
    cfg_starts = _fit_config(args).initial_rhos
    for i, (r0, r1, it, ok) in enumerate(zip(cfg_starts, res.per_start_rhos,
                                             res.per_start_iterations,
                                             res.per_start_converged)):
        print(f"{i:5d}  {r0:+.4f}   {r1:.4f}     {it:5d}       {str(bool(ok)).lower()}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "y", "f_hat"])
            for i, (a, b) in enumerate(zip(y, res.f_hat)):
                w.writerow([i, f"{a:.6g}", f"{b:.6g}"])
        print(f"f_hat written to {args.out}")
    return 0


def _test_labels(branch: Branch, j: int, alpha: float) -> tuple[str, str]:
    z = f"z_{1 - alpha:.2f}"
    if branch is Branch.P_GE_2:
        return f"T(j({j}))", f"v_0(j({j})){z}"
    if branch is Branch.P_IN_1_2:
        return f"T(j({j}))+Q(j({j}))", f"sqrt(v_0^2({j})+w_0^2({j})){z}"
    return f"max standardized (j={j})", "sqrt(2 ln ln eta^-2)"


def cmd_test(args) -> int:
    y = read_series(args.input, args.column, args.time_column, args.n)
    ref = read_series(args.reference, args.column, args.time_column, args.n)
    if len(y) != len(ref):
        raise UsageError(f"length mismatch: input {len(y)} vs reference {len(ref)}")
    res = fit(y, _fit_config(args))
    z = prewhiten(y, res.rho_hat)
    g = prewhiten(ref, res.rho_hat)
    eta = args.eta if args.eta is not None else res.sigma_u_hat / math.sqrt(len(y))
    cfg = TestConfig(alpha=args.alpha, branch=Branch(args.branch), eta=eta,
                     basis=args.basis, j_min=args.j_min)
    out = test_constant_difference(z, g, cfg)
    stat_label, crit_label = _test_labels(cfg.branch, out.j_used, cfg.alpha)
    width = max(len(stat_label), len(crit_label))
    print(f"rho_hat {res.rho_hat:.4f}  eta {eta:.6g}")
    print(f"{stat_label:<{width}}  {out.statistic:.6g}")
    print(f"{crit_label:<{width}}  {out.critical_value:.6g}")
    print(f"decision: {'reject H0' if out.reject else 'do not reject H0'}")
    return 0


def _levels(text):
    return None if text is None else _parse_range(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavefanova",
                                     description="Wavelet FANOVA with CAR(1) errors")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte Carlo study")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--jobs", type=int, default=1)
    sim.add_argument("--seed", type=int)
    sim.set_defaults(func=cmd_simulate)

    def series_args(p):
        p.add_argument("--input", required=True)
        p.add_argument("--column")
        p.add_argument("--time-column")
        p.add_argument("--n", type=int, help="number of leading rows to keep (power of two)")
        p.add_argument("--basis", choices=["db3", "db6", "sym8"], default="db6")
        p.add_argument("--loop", choices=["linear", "term"], default="term")
        p.add_argument("--final", choices=["term", "block", "linear"], default="term")
        p.add_argument("--loop-levels", type=_levels)
        p.add_argument("--final-levels", type=_levels)
        p.add_argument("--starts", type=int, default=5)
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--tol", type=float, default=1e-15)
        p.add_argument("--max-iter", type=int, default=250)

    fp = sub.add_parser("fit", help="estimate rho and f for one series")
    series_args(fp)
    fp.add_argument("--out", help="write y and f_hat to this CSV")
    fp.set_defaults(func=cmd_fit)

    tp = sub.add_parser("test", help="test that input minus reference is constant")
    series_args(tp)
    tp.add_argument("--reference", required=True)
    tp.add_argument("--alpha", type=float, default=0.05)
    tp.add_argument("--branch", choices=[b.value for b in Branch], default="p12")
    tp.add_argument("--eta", type=float)
    tp.add_argument("--j-min", type=int, default=3)
    tp.set_defaults(func=cmd_test)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, WaveFanovaError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
