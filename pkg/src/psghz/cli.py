"""Command-line entry point.

Subcommands: run, sweep, optimize, husimi, outcomes, efficiency. All output
is CSV or JSON with 12 significant digits. Exit status: 0 on success, 2 on
invalid flags, 3 when the post-selected outcome has zero probability.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from contextlib import contextmanager
from dataclasses import replace

import numpy as np

from . import analysis
from .measurement import DEFAULT_BIN_WIDTH, ZeroProbabilityOutcome
from .optimizer import OptimizerConfig, landscape_slice, max_over_variance, optimize
from .protocol import ProtocolParams, Rotation, run_post_selected, run_sampled

EXIT_USAGE = 2
EXIT_ZERO_PROBABILITY = 3


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.12g}"


def _num(x):
    if isinstance(x, (bool, np.bool_)) or x is None:
        return x
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    return None if math.isnan(x) else float(f"{x:.12g}")


def _json(obj: dict) -> str:
    return json.dumps({k: _num(v) for k, v in obj.items()}) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


@contextmanager
def _sink(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


# --- flag parsing helpers -------------------------------------------------


def _interval(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed interval {text!r}; expected lo:hi")
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise argparse.ArgumentTypeError(f"invalid interval {text!r}")
    return lo, hi


def _intervals(text: str) -> list[tuple[float, float]]:
    out = [_interval(part) for part in text.split(",")]
    if not out:
        raise argparse.ArgumentTypeError(f"no intervals in {text!r}")
    return out


def _post_select(text: str):
    if ":" in text:
        return _interval(text)
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed post-selection {text!r}")


def _ghz_phase(text: str):
    if text == "opt":
        return None
    if text.startswith("fixed:"):
        try:
            return float(text[len("fixed:"):])
        except ValueError:
            pass
    raise argparse.ArgumentTypeError(f"expected 'opt' or 'fixed:<radians>', got {text!r}")


def _add_protocol_flags(p: argparse.ArgumentParser):
    p.add_argument("--n", type=int, required=True, help="number of two-level systems")
    p.add_argument("--chi-t", type=float, required=True, help="squeezing parameter")
    p.add_argument("--variance", type=float, required=True, help="measurement variance")
    p.add_argument("--bin-width", type=float, default=DEFAULT_BIN_WIDTH)
    p.add_argument("--post-select", type=_post_select, default=0.0, help="outcome C' or window lo:hi")
    p.add_argument("--ghz-phase", type=_ghz_phase, default=None, help="opt | fixed:<radians>")
    p.add_argument("--step3-angle", type=float, default=-math.pi / 2,
                   help="angle of the x rotation after squeezing")
    p.add_argument("--output", default=None, help="output path (default stdout)")


def _params(args, **overrides) -> ProtocolParams:
    kw = dict(
        n_particles=args.n,
        chi_t=args.chi_t,
        variance=args.variance,
        bin_width=args.bin_width,
        step3=Rotation("x", args.step3_angle),
        post_select=args.post_select,
        ghz_phase=args.ghz_phase,
    )
    kw.update(overrides)
    try:
        return ProtocolParams(**kw)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc))


# --- subcommands ----------------------------------------------------------


def cmd_run(args) -> str:
    params = _params(args)
    if args.sampled:
        res = run_sampled(params, np.random.default_rng(args.seed))
    else:
        if isinstance(params.post_select, tuple):
            raise UsageError("a window --post-select needs --sampled")
        try:
            params.grid.index_of(params.post_select)
        except ValueError as exc:
            raise UsageError(str(exc))
        res = run_post_selected(params)
    out = {
        "n": params.n_particles,
        "chi_t": params.chi_t,
        "variance": params.variance,
        "outcome_bin_center": res.outcome_center,
        "outcome_probability": res.outcome_probability,
        "fidelity": res.fidelity,
        "fidelity_phase": res.fidelity_phase,
    }
    if args.sampled:
        out["accepted"] = res.accepted
    if args.format == "csv":
        return _csv(list(out), [list(out.values())])
    return _json(out)


def _grid(args):
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    if not (math.isfinite(args.from_) and math.isfinite(args.to)) or args.from_ > args.to:
        raise UsageError("--from must not exceed --to")
    if args.steps == 1:
        if args.from_ != args.to:
            raise UsageError("a single step needs --from equal to --to")
        return [args.from_]
    return list(np.linspace(args.from_, args.to, args.steps))


def cmd_sweep(args) -> str:
    values = _grid(args)
    axis = {"variance": "variance", "chi-t": "chi_t", "n": "n_particles"}[args.axis]
    if axis == "n_particles":
        if any(abs(v - round(v)) > 1e-9 for v in values):
            raise UsageError("particle-number grid must be integer valued")
        values = [int(round(v)) for v in values]
    if args.maximize_variance and axis == "variance":
        raise UsageError("--maximize-variance cannot be combined with --axis variance")
    var_grid = list(np.linspace(args.var_from, args.var_to, args.var_steps))
    fixed = {"n_particles": args.n, "chi_t": args.chi_t, "variance": args.variance}
    if args.maximize_variance:
        fixed["variance"] = var_grid[0]
    for name, flag in (("n_particles", "--n"), ("chi_t", "--chi-t"), ("variance", "--variance")):
        if name != axis and fixed[name] is None:
            raise UsageError(f"{flag} is required for this sweep")
    fixed[axis] = values[0]
    base = _params(args, **fixed)
    if isinstance(base.post_select, tuple):
        raise UsageError("sweeps need a single --post-select outcome")
    for v in values:
        _params_check(base, axis, v)
    if args.maximize_variance:
        for v in var_grid:
            _params_check(base, "variance", v)
        rows = []
        for v in values:
            best_var, best_f = max_over_variance(replace(base, **{axis: v}), var_grid)
            rows.append((v, best_f, best_var))
        return _csv(["axis_value", "fidelity", "best_variance"], rows)
    return _csv(["axis_value", "fidelity"], landscape_slice(axis, base, values))


def _params_check(base, field_name, value):
    try:
        replace(base, **{field_name: value})
    except (ValueError, TypeError) as exc:
        raise UsageError(f"grid value {value}: {exc}")


def cmd_optimize(args) -> str:
    try:
        template = ProtocolParams(args.n, args.chi_t_0, args.sigma2_0, bin_width=args.bin_width,
                                  ghz_phase=args.ghz_phase)
        config = OptimizerConfig(
            n_particles=args.n,
            initial=(args.sigma2_0, args.chi_t_0),
            s_var=args.s_var,
            s_chit=args.s_chit,
            var_max=args.var_max,
            threshold=args.threshold,
            max_iterations=args.max_iterations,
            seed=args.seed,
            template=template,
            keep_trace=args.trace is not None,
        )
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc))
    res = optimize(config)
    if args.trace is not None:
        rows = [(r.iteration, r.sigma2, r.chi_t, r.fidelity, r.accepted) for r in res.trace]
        with _sink(args.trace) as fh:
            fh.write(_csv(["iteration", "sigma2", "chi_t", "fidelity", "accepted"], rows))
    return _json({
        "sigma2": res.sigma2,
        "chi_t": res.chi_t,
        "fidelity": res.fidelity,
        "iterations": res.iterations,
        "accepted": res.accepted,
    })


def cmd_husimi(args) -> str:
    if args.theta_steps < 2 or args.phi_steps < 2:
        raise UsageError("grid sizes must be >= 2")
    params = _params(args)
    if isinstance(params.post_select, tuple):
        raise UsageError("husimi needs a single --post-select outcome")
    state = analysis.stage_state(params, args.stage)
    field_ = analysis.husimi(state, args.theta_steps, args.phi_steps)
    rows = (
        (t, p, field_.values[i, j])
        for i, t in enumerate(field_.theta)
        for j, p in enumerate(field_.phi)
    )
    return _csv(["theta", "phi", "value"], rows)


def cmd_outcomes(args) -> str:
    params = _params(args)
    window = args.window or (params.grid.c_min, params.grid.c_max)
    try:
        recs = analysis.fidelity_vs_outcome(params, window)
    except ValueError as exc:
        raise UsageError(str(exc))
    return _csv(["c_center", "probability", "fidelity"],
                [(r.center, r.probability, r.fidelity) for r in recs])


def cmd_efficiency(args) -> str:
    params = _params(args)
    grid = params.grid
    for lo, hi in args.intervals:
        try:
            grid.window(lo, hi)
        except ValueError as exc:
            raise UsageError(str(exc))
    rows = analysis.efficiency_table(params, args.intervals)
    return _csv(["c_lo", "c_hi", "f_min", "f_max", "probability"],
                [(r.c_lo, r.c_hi, r.f_min, r.f_max, r.probability) for r in rows])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psghz", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one pipeline run")
    _add_protocol_flags(p)
    p.add_argument("--sampled", action="store_true", help="sample the outcome instead of post-selecting")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="fidelity along one parameter")
    p.add_argument("--axis", choices=("variance", "chi-t", "n"), required=True)
    p.add_argument("--from", dest="from_", type=float, required=True)
    p.add_argument("--to", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--chi-t", type=float, default=None)
    p.add_argument("--variance", type=float, default=None)
    p.add_argument("--bin-width", type=float, default=DEFAULT_BIN_WIDTH)
    p.add_argument("--post-select", type=_post_select, default=0.0)
    p.add_argument("--ghz-phase", type=_ghz_phase, default=None)
    p.add_argument("--step3-angle", type=float, default=-math.pi / 2)
    p.add_argument("--maximize-variance", action="store_true",
                   help="report the best fidelity over a variance grid per axis value")
    p.add_argument("--var-from", type=float, default=1.0)
    p.add_argument("--var-to", type=float, default=60.0)
    p.add_argument("--var-steps", type=int, default=60)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("optimize", help="greedy random-walk search over (variance, chi_t)")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--sigma2-0", type=float, default=10.0)
    p.add_argument("--chi-t-0", type=float, default=0.3)
    p.add_argument("--s-var", type=float, default=OptimizerConfig.s_var)
    p.add_argument("--s-chit", type=float, default=OptimizerConfig.s_chit)
    p.add_argument("--var-max", type=float, default=OptimizerConfig.var_max)
    p.add_argument("--threshold", type=float, default=OptimizerConfig.threshold)
    p.add_argument("--max-iterations", type=int, default=OptimizerConfig.max_iterations)
    p.add_argument("--bin-width", type=float, default=DEFAULT_BIN_WIDTH)
    p.add_argument("--ghz-phase", type=_ghz_phase, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", default=None, help="write the walk as CSV to this path")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("husimi", help="Husimi field at a pipeline stage")
    _add_protocol_flags(p)
    p.add_argument("--stage", choices=analysis.STAGES, required=True)
    p.add_argument("--theta-steps", type=int, default=121)
    p.add_argument("--phi-steps", type=int, default=241)
    p.set_defaults(func=cmd_husimi)

    p = sub.add_parser("outcomes", help="probability and fidelity per outcome bin")
    _add_protocol_flags(p)
    p.add_argument("--window", type=_interval, default=None, help="lo:hi (default: whole grid)")
    p.set_defaults(func=cmd_outcomes)

    p = sub.add_parser("efficiency", help="fidelity range and probability per interval")
    _add_protocol_flags(p)
    p.add_argument("--intervals", type=_intervals, required=True, help="lo:hi[,lo:hi...]")
    p.set_defaults(func=cmd_efficiency)
    return parser


# flags whose values may begin with "-" (intervals like -5:5)
_SIGNED_FLAGS = ("--post-select", "--window", "--intervals")


def _fold_signed_values(argv: list[str]) -> list[str]:
    """Rewrite ``--flag -5:5`` as ``--flag=-5:5`` so argparse keeps the value."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _SIGNED_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_fold_signed_values(argv))  # exits 2 on malformed flags
    try:
        text = args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"psghz {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ZeroProbabilityOutcome as exc:
        print(f"psghz {args.command}: {exc}", file=sys.stderr)
        return EXIT_ZERO_PROBABILITY
    with _sink(args.output) as fh:
        fh.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
