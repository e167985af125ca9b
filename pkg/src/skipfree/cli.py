"""Command-line front end.

Subcommands: validate, gamma, solve-rg, occupation, reproduce-paper.
Exit codes: 0 success, 1 validation failure, 2 numeric failure, 3 I/O or
parse failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (AssumptionError, DomainError, NoRootError, NoSolutionError, SkipFreeError,
                     StructureError, ValidationError)
from .models import (ModelFormatError, QueueRates, build_three_queue, load_model, load_triplet,
                     validate)
from .occupation import (check_window, default_window, fundamental_box, n0n_consistency,
                         transverse_samples, verify_bounds)
from .phase import spectral_radius
from .region import cp_r_truncated, gamma_region, zeta_roots
from .rg import solve_rg, wiener_hopf_residual

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

# reference decay-rate bounds z_max for lambda = (0.1, 0.2, lambda3), mu = (1, 1, 1)
REFERENCE_ZMAX = {
    0.3: (5.53, 2.77, 1.85),
    0.6: (7.77, 3.88, 1.29),
}
REFERENCE_TOL = 0.01

DEFAULTS = {
    "model": None, "triplet": None, "scalar": None,
    "lambda1": 0.1, "lambda2": 0.2, "lambda3": 0.3,
    "mu1": 1.0, "mu2": 1.0, "mu3": 1.0,
    "tol": None, "levels": None, "box": 24, "window": None,
    "out": "out", "seed": 0, "boundary": 64, "max_iter": 200_000,
}


@dataclass
class RunConfig:
    command: str
    model: Optional[str] = None
    triplet: Optional[str] = None
    scalar: Optional[tuple] = None
    rates: QueueRates = field(default_factory=lambda: QueueRates((0.1, 0.2, 0.3), (1.0, 1.0, 1.0)))
    tol: Optional[float] = None
    levels: Optional[int] = None
    box: int = 24
    window: Optional[tuple] = None
    out: Optional[Path] = None
    seed: int = 0
    boundary: int = 64
    max_iter: int = 200_000

    def __post_init__(self):
        if self.tol is not None and not self.tol > 0:
            raise ValidationError(f"--tol must be positive, got {self.tol}")
        if (self.levels is not None and self.levels < 1) or self.box < 1:
            raise ValidationError("--levels and --box must be >= 1")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_IO, f"{self.prog}: error: {message}\n")


def _window_arg(text):
    try:
        lo, hi = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("window must be 'n_lo,n_hi'")
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option values; flags override it")
    common.add_argument("--model", help="model JSON file (default: built-in three-queue model)")
    for name in ("lambda1", "lambda2", "lambda3", "mu1", "mu2", "mu3"):
        common.add_argument(f"--{name}", type=float, default=None)
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--levels", type=int, default=None, help="truncation levels")
    common.add_argument("--box", type=int, default=None, help="occupation box edge L")
    common.add_argument("--window", type=_window_arg, default=None, help="fit window n_lo,n_hi")
    common.add_argument("--out", default=None, help="output directory for CSV files")
    common.add_argument("--seed", type=int, default=None)

    parser = _Parser(prog="skipfree", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("validate", parents=[common], help="check model assumptions")
    g = sub.add_parser("gamma", parents=[common], help="spectral region and decay bounds")
    g.add_argument("--boundary", type=int, default=None, help="number of boundary samples")
    r = sub.add_parser("solve-rg", parents=[common], help="R, G and N of a QBD triplet")
    r.add_argument("--triplet", help="triplet JSON file with lower/diag/upper")
    r.add_argument("--scalar", type=float, nargs=3, metavar=("Q", "R", "P"),
                   help="scalar triplet: down, stay, up probabilities")
    r.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    sub.add_parser("occupation", parents=[common], help="box occupation and decay-bound checks")
    sub.add_parser("reproduce-paper", parents=[common], help="z_max for both reference rate sets")
    return parser


def make_config(args) -> RunConfig:
    values = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ModelFormatError(f"cannot read {args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"invalid JSON in {args.config}: {exc.msg}", exc.lineno, exc.colno)
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        values.update(data)
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    rates = QueueRates((values["lambda1"], values["lambda2"], values["lambda3"]),
                       (values["mu1"], values["mu2"], values["mu3"]))
    return RunConfig(
        command=args.command, model=values["model"], triplet=values["triplet"],
        scalar=tuple(values["scalar"]) if values["scalar"] else None, rates=rates,
        tol=values["tol"], box=int(values["box"]),
        levels=None if values["levels"] is None else int(values["levels"]),
        window=tuple(values["window"]) if values["window"] else None,
        out=Path(values["out"]) if values["out"] else None, seed=int(values["seed"]),
        boundary=int(values["boundary"]), max_iter=int(values["max_iter"]),
    )


def fmt(x) -> str:
    """17 significant digits, no locale."""
    return f"{float(x):.17g}"


def write_csv(cfg: RunConfig, name: str, header, rows):
    if cfg.out is None:
        return None
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / name
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def load_model_from(cfg: RunConfig):
    if cfg.model:
        return load_model(cfg.model)
    return build_three_queue(cfg.rates)


def _require_valid(model):
    report = validate(model)
    if not report.ok:
        for line in report.lines():
            print(line)
        raise ValidationError("model fails the assumption checks (see report above)")


def cmd_validate(cfg: RunConfig) -> int:
    report = validate(load_model_from(cfg))
    for line in report.lines():
        print(line)
    print("valid" if report.ok else "INVALID")
    return EXIT_OK if report.ok else EXIT_VALIDATION


def _vec(v, digits=6):
    return "(" + ", ".join(f"{x:.{digits}f}" for x in v) + ")"


def cmd_gamma(cfg: RunConfig) -> int:
    model = load_model_from(cfg)
    # the region is defined without the drift and boundary assumptions; report, don't refuse
    for line in validate(model).lines():
        if "FAIL" in line:
            print("warning:", line)
    rep = gamma_region(model, tol=cfg.tol or 1e-8, n_boundary=cfg.boundary)
    print(f"gamma*  = {rep.gamma_star:.10f} at s = {_vec(rep.argmin)}")
    print(f"drift   = {_vec(rep.drift, 8)}")
    if rep.degenerate:
        print("degenerate region: gamma* = 1, the region is the single point s*")
    print(f"s_max   = {_vec(rep.s_max)}    z_max = {_vec(rep.z_max, 4)}")
    print(f"s_min   = {_vec(rep.s_min)}    z_min = {_vec(rep.z_min, 4)}")
    write_csv(cfg, "gamma_extremes.csv", ["coordinate", "s_min", "s_max", "z_min", "z_max"],
              [[i + 1, rep.s_min[i], rep.s_max[i], rep.z_min[i], rep.z_max[i]] for i in range(3)])
    write_csv(cfg, "gamma_boundary.csv", ["s1", "s2", "s3", "chi"], rep.boundary_samples)
    if cfg.levels and not rep.degenerate:
        # truncated cp(R) next to the bound; the gap is reported, not asserted to vanish
        levels = sorted({max(1, cfg.levels // 4), max(1, cfg.levels // 2), cfg.levels})
        rows = []
        for i in range(3):
            seq = cp_r_truncated(model, i, levels)
            print(f"cp(R^({i + 1})) at L = " + ", ".join(f"{L}: {c:.4f}" for L, c in seq)
                  + f"    (bound z_max = {rep.z_max[i]:.4f})")
            rows += [[i + 1, L, c, rep.z_max[i]] for L, c in seq]
        write_csv(cfg, "gamma_cp.csv", ["coordinate", "L", "cp_R", "z_max"], rows)
    return EXIT_OK


def _triplet_from(cfg: RunConfig):
    if cfg.triplet:
        t = load_triplet(cfg.triplet)
        return t.lower, t.diag, t.upper
    if cfg.scalar:
        q, r, p = cfg.scalar
        return np.array([[q]]), np.array([[r]]), np.array([[p]])
    raise ValidationError("solve-rg needs --triplet FILE or --scalar Q R P")


def _show_matrix(name, M):
    if M.shape[0] <= 6:
        rows = [" ".join(f"{x:.4f}" for x in row) for row in M]
        print(f"{name} =", rows[0] if len(rows) == 1 else "")
        if len(rows) > 1:
            for row in rows:
                print("   ", row)
    else:
        print(f"{name}: {M.shape[0]}x{M.shape[0]}, max-row-sum norm {np.max(M.sum(axis=1)):.6g}, "
              f"spr {spectral_radius(M):.6g}")


def cmd_solve_rg(cfg: RunConfig) -> int:
    A_m, A_0, A_1 = _triplet_from(cfg)
    tol = cfg.tol or 1e-12
    try:
        sol = solve_rg(A_m, A_0, A_1, tol=tol, max_iter=cfg.max_iter, allow_slow=True)
    except NoSolutionError as exc:
        print(f"no minimal solution: {exc}")
        print("diagnosis: gamma* > 1 (inf over z of spr(A_*(z)) exceeds one)")
        return EXIT_NUMERIC
    if not sol.converged:
        print(f"warning: slow (sublinear) convergence, tol {tol:g} not reached in {cfg.max_iter} "
              "steps; values are the last monotone iterates (lower bounds). This is typical of "
              "a null-recurrent level process.")
    for name in ("R", "G", "N", "H"):
        _show_matrix(name, getattr(sol, name))
    print(f"iterations = {sol.iterations}")
    print(f"residuals: R {sol.residual_R:.3e}  G {sol.residual_G:.3e}  N {sol.residual_N:.3e}")
    ident = sol.identity_residuals(A_m, A_1)
    print(f"identities: |R - A_1 N| {ident[0]:.3e}  |G - N A_-1| {ident[1]:.3e}")

    def chi_1d(z):
        return spectral_radius(A_m / z + A_0 + z * A_1, 1e-14, method="eig")

    grid = [0.5, 0.8, 1.0, 1.2]
    try:
        lo, hi = zeta_roots(chi_1d)
        print(f"zeta roots: {lo:.10f}, {hi:.10f}")
        grid.append(hi)
    except NoRootError:
        pass
    res = [(z, wiener_hopf_residual(A_m, A_0, A_1, sol, z)) for z in grid]
    print("Wiener-Hopf residuals: " + ", ".join(f"z={z:.4g}: {r:.2e}" for z, r in res))
    write_csv(cfg, "rg_wiener_hopf.csv", ["z", "residual"], res)
    return EXIT_OK


def cmd_occupation(cfg: RunConfig) -> int:
    model = load_model_from(cfg)
    _require_valid(model)
    L = cfg.box
    window = check_window(L, cfg.window or default_window(L))
    tol = cfg.tol or 1e-12
    starts = [(0, 0, 0, 0), (1, 1, 0, min(1, model.s0 - 1))]
    occs = [fundamental_box(model, y, L, tol, method="power-sum") for y in starts]
    for o in occs:
        print(f"start {o.origin}: {o.iterations} sweeps, fixed-point defect {o.residual:.2e}, "
              f"total mass {o.values.sum():.6f}")
    report = verify_bounds(model, L=L, window=window, y=starts[0], y2=starts[1],
                           occupations=occs, tol=tol)
    rows = []
    for o in occs:
        for i in range(3):
            for t in transverse_samples(L, model.s0):
                line = o.line(i, t)
                for n, q in enumerate(line):
                    rows.append([i + 1, n, t[0], t[1], t[2], "%d.%d.%d.%d" % o.origin, float(q),
                                 float(math.log(q)) if q > 0 else "-inf"])
    write_csv(cfg, "occupation_slices.csv",
              ["direction", "n", "transverse_a", "transverse_b", "phase", "start", "q_value", "log_q"],
              rows)
    slope_rows = []
    for e, c in zip(report.slopes, [c for c in report.checks if c.kind == "bound"]):
        slope_rows.append([e.direction + 1, e.transverse[0], e.transverse[1], e.transverse[2],
                           "%d.%d.%d.%d" % c.start, e.slope, e.r_squared, e.fit_window[0],
                           e.fit_window[1], c.limit, "pass" if c.passed else "fail"])
    write_csv(cfg, "decay_slopes.csv",
              ["direction", "transverse_a", "transverse_b", "phase", "start", "slope", "r_squared",
               "n_lo", "n_hi", "bound_plus_slack", "status"], slope_rows)
    for line in report.summary():
        print(line)
    # optional cross-check of the matrix-geometric form on a transverse truncation
    n0n = [n0n_consistency(model, i, L=cfg.levels) for i in range(3)] if cfg.levels else []
    for rep in n0n:
        print(f"direction {rep.direction + 1}: N_0n = N_00 R^n on {cfg.levels}x{cfg.levels} transverse "
              f"truncation, max relative residual {rep.max_residual:.2e} (n <= {rep.n_max})")
    if cfg.out is not None:
        text = "\n".join(report.summary() + [c.line() for c in report.checks]) + "\n"
        (cfg.out / "bound_report.txt").write_text(text)
    return EXIT_OK if report.passed else EXIT_NUMERIC


def cmd_reproduce(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    rows, ok = [], True
    print(f"{'lambda3':>8} {'coord':>5} {'z_max':>10} {'reference':>10} {'|diff|':>8}  status")
    for lam3, ref in REFERENCE_ZMAX.items():
        rates = QueueRates((cfg.rates.lam[0], cfg.rates.lam[1], lam3), cfg.rates.mu)
        rep = gamma_region(build_three_queue(rates), tol=cfg.tol or 1e-8, lower=False)
        for i in range(3):
            diff = abs(rep.z_max[i] - ref[i])
            passed = diff <= REFERENCE_TOL
            ok &= passed
            rows.append([lam3, i + 1, float(rep.z_max[i]), ref[i], float(diff), "pass" if passed else "fail"])
            print(f"{lam3:8.2f} {i + 1:5d} {rep.z_max[i]:10.4f} {ref[i]:10.2f} {diff:8.4f}  "
                  f"{'pass' if passed else 'FAIL'}")
    print(f"elapsed {time.perf_counter() - t0:.2f} s")
    write_csv(cfg, "reproduce.csv", ["lambda3", "coordinate", "z_max", "reference", "abs_diff", "status"],
              rows)
    return EXIT_OK if ok else EXIT_NUMERIC


COMMANDS = {
    "validate": cmd_validate,
    "gamma": cmd_gamma,
    "solve-rg": cmd_solve_rg,
    "occupation": cmd_occupation,
    "reproduce-paper": cmd_reproduce,
}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (ModelFormatError, OSError)):
        return EXIT_IO
    if isinstance(exc, (ValidationError, AssumptionError, StructureError, DomainError)):
        return EXIT_VALIDATION
    return EXIT_NUMERIC


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = make_config(args)
        return COMMANDS[cfg.command](cfg)
    except (SkipFreeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
