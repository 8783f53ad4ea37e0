"""Command-line driver.

Exit codes: 0 success with every check passing, 1 a check failed, 2 a
configuration or usage error, 3 a numerical error.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import constants as C
from . import estimates as E
from . import harness as H
from . import models as M
from . import regularity as R
from .engine import simulate_paths
from .errors import ConfigurationError, NumericalError, SingularEMError
from .randomness import GridSpec, generate_increments

SEED_ENV = "SINGULAR_EM_SEED"

PRECEDENCE = (
    "Precedence: command-line flags override --config values, which override the "
    f"{SEED_ENV} environment variable (seed only), which overrides built-in defaults."
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigurationError("cli.parse", message)


def _real(text: str) -> float:
    try:
        return H._parse_real(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a real number: {text!r}") from None


def _reals(text: str) -> tuple:
    try:
        return tuple(H._parse_real(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of reals: {text!r}") from None


def _add_common(p: argparse.ArgumentParser, *, paths_default: Optional[int] = None):
    p.add_argument("--config", help="flat key=value study file")
    p.add_argument("--out", help="CSV output path (written atomically)")
    p.add_argument("--seed", type=int, help=f"master seed (fallback: ${SEED_ENV}, then 0)")
    p.add_argument("--paths", type=int, default=paths_default, help="number of Monte Carlo paths")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads (results do not depend on it)")
    p.add_argument("--model", help="catalog model label")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="singular-em", description="Euler-Maruyama under singular drifts.", epilog=PRECEDENCE)
    sub = parser.add_subparsers(dest="command", metavar="{simulate,converge,constants,krylov,density,regularity}",
                                parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", help="EM paths on one grid", epilog=PRECEDENCE)
    _add_common(p, paths_default=1)
    p.add_argument("--x0", type=_reals)
    p.add_argument("--T", type=_real)
    p.add_argument("--delta", type=_real, default=2.0**-8)

    p = sub.add_parser("converge", help="strong-error rate study", epilog=PRECEDENCE)
    _add_common(p)
    p.add_argument("--x0", type=_reals)
    p.add_argument("--T", type=_real)
    p.add_argument("--deltas", type=_reals)
    p.add_argument("--ref-refinement", type=int)
    p.add_argument("--beta", type=_real)
    p.add_argument("--truncation-mode", choices=H.TRUNCATION_MODES)
    p.add_argument("--truncation-k", type=_real)
    p.add_argument("--margin", type=_real, default=H.DEFAULT_MARGIN)

    p = sub.add_parser("constants", help="explicit bound constants of a model", epilog=PRECEDENCE)
    _add_common(p)
    p.add_argument("--digits", type=int, default=15)

    p = sub.add_parser("krylov", help="occupation-time and exponential-moment checks", epilog=PRECEDENCE)
    _add_common(p, paths_default=10_000)
    p.add_argument("--lam", type=_reals, default=(0.5, 1.0, 2.0))
    p.add_argument("--field", default="indicator:0,1", help="indicator:a1,a2 | const:value:lo,hi | zero")
    p.add_argument("--delta", type=_real, default=2.0**-8)
    p.add_argument("--x0", type=_reals)
    p.add_argument("--process", choices=("em", "exact-proxy"), default="em")

    p = sub.add_parser("density", help="histogram against the Gaussian envelope", epilog=PRECEDENCE)
    _add_common(p, paths_default=100_000)
    p.add_argument("--delta", type=_real, default=2.0**-6)
    p.add_argument("--anchor-j", type=int, default=0)
    p.add_argument("--t", type=_real, default=0.5)
    p.add_argument("--bins", type=int, default=200)
    p.add_argument("--x", type=_reals)

    p = sub.add_parser("regularity", help="smoothed modulus and exponent fit", epilog=PRECEDENCE)
    _add_common(p)
    p.add_argument("--s", type=_reals, default=(0.25, 0.5, 1.0))
    p.add_argument("--offsets", type=_reals, default=tuple(2.0**-j for j in range(2, 7)))
    return parser


def _seed(args, config_seed: Optional[int] = None) -> int:
    if args.seed is not None:
        return args.seed
    if config_seed is not None:
        return config_seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigurationError("cli.seed", f"{SEED_ENV}={env!r} is not an integer") from None
    return 0


def _model(args, default: str = "indicator-1d") -> M.SdeModel:
    return M.get_model(args.model or default)


def _write(args, text: str) -> None:
    if args.out:
        H.atomic_write_text(args.out, text)


def _csv(header: Sequence[str], rows) -> str:
    return "\n".join([",".join(header)] + [",".join(str(v) for v in r) for r in rows]) + "\n"


def cmd_simulate(args) -> int:
    model = _model(args)
    T = args.T if args.T is not None else 1.0
    grid = GridSpec(T, int(round(T / args.delta)))
    x0 = np.asarray(args.x0 if args.x0 is not None else np.zeros(model.dim_d), dtype=float)
    n = args.paths
    seed = _seed(args)
    states = simulate_paths(model, x0, generate_increments(seed, range(n), grid, model.noise_dim_m), grid.dt)
    times = grid.times()
    header = ["path", "t"] + [f"x{i + 1}" for i in range(model.dim_d)]
    rows = ([k, repr(float(t))] + [repr(float(v)) for v in states[k, i]] for k in range(n) for i, t in enumerate(times))
    _write(args, _csv(header, rows))
    term = states[:, -1]
    print(f"model {model.label}: {n} path(s), {grid.n_steps} steps of {grid.dt!r}, seed {seed}")
    print(f"terminal mean = {np.array2string(term.mean(axis=0), precision=6)}")
    return 0


def _study_config(args) -> H.StudyConfig:
    values, source = {}, "<flags>"
    if args.config:
        source = args.config
        with open(args.config) as fh:
            values = H.parse_config_values(fh.read(), source)
    pairs = {}
    for key in ("model", "T", "beta", "truncation_mode", "ref_refinement", "truncation_k"):
        if getattr(args, key) is not None:
            pairs[key] = str(getattr(args, key))
    for key in ("x0", "deltas"):
        if getattr(args, key) is not None:
            pairs[key] = ",".join(repr(v) for v in getattr(args, key))
    if args.paths is not None:
        pairs["n_paths"] = str(args.paths)
    values.update(H.config_overrides(pairs))
    values["seed"] = _seed(args, values.get("seed"))
    return H.build_config(values, source)


def cmd_converge(args) -> int:
    config = _study_config(args)
    model = M.get_model(config.model_label)
    fit = H.run_convergence(config, threads=args.threads, model=model)
    consts = None
    if np.isfinite(model.assumptions.b_sup) and model.assumptions.in_krylov_class(model.dim_d):
        consts = C.model_constants(model)
    report = H.rate_report(fit, consts, margin=args.margin)
    _write(args, H.format_csv(fit))
    print(f"model {model.label}: beta={config.beta} n_paths={config.n_paths} seed={config.seed} "
          f"reference delta={config.reference_grid().dt!r}")
    if fit.truncation_levels is not None:
        print("truncation radii: " + ", ".join(f"{k:.4f}" for k in fit.truncation_levels))
    for delta, mean, se in fit.points:
        print(f"  delta={delta:<12.6g} error={mean:.6g} +- {se:.2g}")
    print(report.as_text())
    if not report.applicable:
        return 0
    return 0 if report.passed else 1


def cmd_constants(args) -> int:
    report = C.model_constants(_model(args))
    print(report.as_text(args.digits))
    if args.out:
        rec = report.as_record()
        _write(args, _csv(["name", "value"], [(k, rec[k]) for k in C.ConstantsReport.VALUE_FIELDS]))
    return 0


def _field(spec: str, model: M.SdeModel, T: float) -> M.ScalarField:
    a = model.assumptions
    kind, _, rest = spec.partition(":")
    try:
        if kind == "indicator":
            a1, a2 = (float(v) for v in rest.split(","))
            if model.dim_d != 1:
                raise ConfigurationError("cli.krylov", "indicator fields are one-dimensional")
            return M.indicator_field(a1, a2, T, a.p, a.q)
        if kind == "const":
            value, _, box = rest.partition(":")
            lo, hi = (float(v) for v in (box or "-1,1").split(","))
            return M.constant_field(float(value), [(lo, hi)] * model.dim_d, T, a.p, a.q)
        if kind == "zero":
            return M.zero_field()
    except ValueError:
        pass
    raise ConfigurationError("cli.krylov", f"cannot parse field {spec!r}")


def cmd_krylov(args) -> int:
    model = _model(args)
    T = model.assumptions.horizon_T
    grid = GridSpec(T, int(round(T / args.delta)))
    f = _field(args.field, model, T)
    seed = _seed(args)
    x0 = args.x0
    base = E.krylov_functional_mc(model, f, grid, args.paths, seed, x0=x0, threads=args.threads)
    print(f"model {model.label}, field {f.label}, delta={grid.dt!r}, n_paths={args.paths}, seed={seed}")
    print(f"E int |f| dt = {base.functional_mean:.6g} +- {base.functional_ci95:.2g}  "
          f"one-step bound = {C.mp.nstr(base.onestep_bound, 6)}")
    rows, ok = [], base.passed
    for lam in args.lam:
        r = E.khasminskii_mc(model, f, lam, grid, args.paths, seed, x0=x0, process=args.process, threads=args.threads)
        ok = ok and r.passed and r.jensen_ok
        rows.append((repr(lam), repr(r.functional_mean), repr(r.functional_ci95), repr(r.exp_mean), repr(r.exp_ci95),
                     C.mp.nstr(r.log2_exp_bound, 17), r.passed, r.jensen_ok))
        print(f"  lam={lam:<5g} E exp = {r.exp_mean:.6g} +- {r.exp_ci95:.2g}  "
              f"log2 bound = {C.mp.nstr(r.log2_exp_bound, 6)}  {'PASS' if r.passed else 'FAIL'}"
              + ("" if r.jensen_ok else "  (Jensen check failed)") + (f"  {r.diagnostics}" if r.diagnostics else ""))
    _write(args, _csv(["lam", "functional_mean", "functional_ci95", "exp_mean", "exp_ci95", "log2_bound", "passed",
                       "jensen_ok"], rows))
    return 0 if ok else 1


def cmd_density(args) -> int:
    model = _model(args)
    T = model.assumptions.horizon_T
    grid = GridSpec(T, int(round(T / args.delta)))
    seed = _seed(args)
    dc = E.density_check(model, grid, args.anchor_j, args.t, args.paths, args.bins, seed, x=args.x)
    header = [f"center{i + 1}" for i in range(model.dim_d)] + [
        "width", "count", "empirical_density", "bound_value", "slack_3sigma", "log_bound"]
    rows = ([repr(c) for c in b.center] + [repr(b.width), b.count, repr(b.empirical_density), repr(b.bound_value),
                                           repr(b.slack_3sigma), repr(b.log_bound)] for b in dc.bins)
    _write(args, _csv(header, rows))
    print(f"model {model.label}: t={args.t} anchor j={args.anchor_j} delta={grid.dt!r} n_paths={args.paths} "
          f"bins={len(dc.bins)} violations={dc.violations}" + (" (degenerate)" if dc.degenerate else ""))
    return 0 if dc.violations == 0 else 1


def cmd_regularity(args) -> int:
    model = _model(args)
    d = model.dim_d
    rows = []
    direction = np.ones(d) / np.sqrt(d)
    for s in args.s:
        for h in args.offsets:
            m = R.a2_modulus(model, d, s, h * direction, np.zeros(d))
            rows.append((repr(s), repr(h), repr(m.value)))
    _write(args, _csv(["s", "offset", "modulus"], rows))
    fit = R.fit_alpha(model, d, args.s, args.offsets, direction)
    if fit.degenerate:
        print(f"model {model.label}: modulus vanishes identically (constant drift); alpha undefined")
    else:
        print(f"model {model.label}: alpha_hat = {fit.alpha_hat:.4f}  r2 = {fit.r_squared:.6f}  "
              f"per-s slopes = {', '.join(f'{v:.4f}' for v in fit.slopes_by_s)}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "converge": cmd_converge,
    "constants": cmd_constants,
    "krylov": cmd_krylov,
    "density": cmd_density,
    "regularity": cmd_regularity,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.paths is not None and args.paths < 0:
            raise ConfigurationError("cli.parse", f"--paths must be >= 0, got {args.paths}")
        if args.threads < 1:
            raise ConfigurationError("cli.parse", f"--threads must be >= 1, got {args.threads}")
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        # --help exits 0; anything else argparse rejects is a usage error
        return 0 if exc.code in (0, None) else 2
    except SingularEMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: cli.io: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"error: cli.numerics: {exc}", file=sys.stderr)
        return NumericalError.exit_code
    except Exception as exc:  # keep the exit-code taxonomy closed
        print(f"error: cli.internal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
