"""Command-line front end.

Every subcommand prints a short human-readable result and writes a JSON
report ``{config, results, seeds, timing}`` to ``--out``.  Exit codes:
0 on success, 2 when an experiment's stated tolerance is not met, 1 on
usage or configuration errors.
"""

from __future__ import annotations

import argparse
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import io
from .experiments import (
    cone_certificate,
    cone_explode,
    exp_critical_clt,
    exp_density_conservation,
    exp_dirac_identity,
    exp_equality_in_law,
    exp_s0_line,
    exp_scaling,
    parse_law,
    phi_psi_eval,
)
from .field import CholeskySampler, SpectralSampler, covariance, estimate
from .graph import laplacian_apply, make_dirichlet_box, make_torus
from .green import (
    green_averaged,
    green_dirichlet_box,
    green_killed,
    kernel_constant,
    nu_n,
    variogram_fourier,
)
from .rng import trial_rng
from .sandpile import Configuration, solve_odometer_exact, topple_nested, topple_parallel

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAIL = 2
DEFAULT_OUT = "sandpile-runs"
SEED_MAX = 2**64 - 1


class UsageError(Exception):
    """Bad flags or parameter ranges; reported with exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# argument types ---------------------------------------------------------


def _seed(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= v <= SEED_MAX:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number list {text!r}") from None


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer list {text!r}") from None


def _fraction(text):
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"invalid rational {text!r}") from None


def _law(text):
    try:
        return parse_law(text)
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


# helpers ----------------------------------------------------------------


def _graph_from(args):
    if getattr(args, "torus", None):
        n, d = args.torus
        return make_torus(n, d)
    if getattr(args, "box", None):
        r, d = args.box
        return make_dirichlet_box(r, d)
    raise UsageError("one of --torus N D or --box R D is required")


def _initial(args, g):
    if args.mass is not None:
        s = np.asarray(args.mass, dtype=float)
        if s.size != g.vertex_count:
            raise UsageError(f"--mass has {s.size} values, graph has {g.vertex_count} vertices")
        return s
    rng = trial_rng(args.seed, 0, "cli-initial")
    s = args.law.sample(rng, g.vertex_count)
    if args.critical:
        s = s - s.mean() + 1.0
    return s


def _fmt(x) -> str:
    return format(float(x), ".12g")


def _fmt_vec(v) -> str:
    return "(" + ", ".join(_fmt(x) for x in v) + ")"


def _config(args) -> dict:
    skip = {"func", "out", "csv"}
    cfg = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        if isinstance(v, Fraction):
            v = str(v)
        elif hasattr(v, "describe"):
            v = v.describe()
        cfg[k] = v
    return cfg


class _Run:
    """Collects results and writes a single report at the end."""

    def __init__(self, args):
        self.args = args
        self.t0 = time.perf_counter()
        self.results: dict = {}
        self.seeds: dict = {"master": getattr(args, "seed", 0)}
        self.exit = EXIT_OK

    def attach(self, report):
        self.results.update(report.results())
        self.seeds.update(report.seeds)
        for line in report.lines():
            print(line)
        if not report.passed:
            self.exit = EXIT_FAIL

    def path(self, suffix: str) -> Path:
        stem = f"{self.args.command}-seed{self.seeds['master']}"
        return Path(self.args.out) / f"{stem}{suffix}"

    def finish(self) -> int:
        try:
            path = io.write_json_report(self.path(".json"), _config(self.args),
                                        self.results, self.seeds,
                                        time.perf_counter() - self.t0)
        except OSError as exc:
            print(f"error: cannot write report: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(f"report: {path}")
        return self.exit


# subcommands ------------------------------------------------------------


def cmd_stabilize(args, run):
    g = _graph_from(args)
    s = _initial(args, g)
    conf = Configuration(g, s)
    if args.radii:
        rep = topple_nested(conf, args.radii, args.tol, args.max_sweeps,
                            method=args.nested_method)[-1]
    else:
        rep = topple_parallel(conf, args.tol, args.max_sweeps)
    print(f"status: {rep.status.value}  sweeps: {rep.sweeps}")
    if g.vertex_count <= 16:
        print(f"u = {_fmt_vec(rep.odometer)}")
        print(f"s_inf = {_fmt_vec(rep.final_config.values)}")
    else:
        print(f"max u = {_fmt(rep.odometer.max())}")
    run.results.update({"summary": rep.summary(), "odometer": rep.odometer,
                        "final_config": rep.final_config.values})
    if args.csv:
        io.write_vertex_csv(run.path("-odometer.csv"), g, rep.odometer, "odometer")
    if not rep.stabilized:
        run.exit = EXIT_FAIL


def cmd_odometer_exact(args, run):
    g = _graph_from(args)
    args.critical = True
    s = _initial(args, g)
    u = solve_odometer_exact(Configuration(g, s))
    resid = float(np.max(np.abs(s + laplacian_apply(g, u) - 1.0)))
    print(f"min u = {_fmt(u.min())}  max u = {_fmt(u.max())}  residual = {resid:.3g}")
    if g.vertex_count <= 16:
        print(f"u = {_fmt_vec(u)}")
    run.results.update({"odometer": u, "min": float(u.min()), "residual": resid})
    if args.csv:
        io.write_vertex_csv(run.path("-odometer.csv"), g, u, "odometer")


def cmd_green(args, run):
    if args.kind == "dirichlet":
        if args.radius is None:
            raise UsageError("--radius is required for --kind dirichlet")
        col = green_dirichlet_box(args.radius, args.d)
        g = make_dirichlet_box(args.radius, args.d)
        nu = nu_n(col)
        print(f"nu_n = {_fmt(nu)}  g_n(o,o) = {_fmt(col[g.origin])}")
        run.results.update({"column": col, "nu_n": nu})
    else:
        if args.n is None:
            raise UsageError("--n is required for torus Green functions")
        g = make_torus(args.n, args.d)
        if args.kind == "killed":
            z = g.index(args.z) if args.z else g.origin
            table = green_killed(g, z)
        else:
            table = green_averaged(g)
            K = float(np.mean(kernel_constant(table)))
            print(f"K = {_fmt(K)}")
            run.results["K"] = K
        col = table.table[g.origin]
        print(f"g(o,o) = {_fmt(col[g.origin])}")
        run.results["column"] = col
    if args.csv:
        io.write_vertex_csv(run.path("-green.csv"), g, col, "green")


def cmd_variogram(args, run):
    if args.lag is not None:
        if len(args.lag) != args.d:
            raise UsageError(f"--lag needs {args.d} coordinates")
        val = variogram_fourier(args.n, args.d, args.lag)
        print(_fmt(val))
        run.results.update({"lag": args.lag, "variogram": val})
    if args.csv or args.lag is None:
        g = make_torus(args.n, args.d)
        lags = g.coords_array()
        vals = np.array([variogram_fourier(args.n, args.d, x) for x in lags])
        run.results["table"] = {"lags": lags, "values": vals}
        if args.csv:
            io.write_variogram_csv(run.path("-variogram.csv"), lags, vals)
        if args.lag is None:
            print(f"{len(vals)} lags, max variogram {_fmt(vals.max())}")


def cmd_sample_field(args, run):
    if args.method == "cholesky":
        sampler = CholeskySampler(covariance(green_averaged(make_torus(args.n, args.d))),
                                  args.seed)
    else:
        sampler = SpectralSampler(args.n, args.d, args.seed, raw=args.raw)
    rows = np.stack([sampler.draw(t) for t in range(args.trials)])
    if args.method == "cholesky" and not args.raw:
        rows -= rows.min(axis=1, keepdims=True)
    maxima = estimate(rows.max(axis=1)) if args.trials > 1 else None
    kind = "raw" if args.raw else "min-shifted"
    print(f"{args.trials} {kind} samples on Z_{args.n}^{args.d}")
    if maxima:
        print(f"mean max = {_fmt(maxima.mean)} +- {_fmt(maxima.se)}")
        run.results["max_statistic"] = maxima.as_dict()
    run.results["sample_mean"] = float(rows.mean())
    run.seeds["stream"] = sampler.stream
    if args.csv:
        io.write_samples_csv(run.path("-samples.csv"), rows,
                             [f"v{i}" for i in range(rows.shape[1])])


def cmd_equality(args, run):
    run.attach(exp_equality_in_law(args.n, args.d, args.trials, args.seed,
                                   bootstrap=args.bootstrap))


def cmd_scaling(args, run):
    table = exp_scaling(args.d, args.n_list, args.trials, args.seed,
                        cross_check=args.cross_check)
    for row in table.rows:
        print(f"n={row.n:5d}  E u = {_fmt(row.mean)} +- {_fmt(row.se)}  "
              f"ratio to phi = {_fmt(row.mean / row.phi)}")
    lo, hi = table.ci
    print(f"slope = {_fmt(table.slope)}  95% CI [{_fmt(lo)}, {_fmt(hi)}]")
    run.attach(table.report)


def cmd_clt(args, run):
    run.attach(exp_critical_clt(args.d, args.radii, args.trials, args.law, args.seed))


def cmd_dirac(args, run):
    run.attach(exp_dirac_identity(args.n, args.d, args.beta, args.t_max))


def cmd_density(args, run):
    g = _graph_from(args)
    run.attach(exp_density_conservation(g, args.law, args.trials, args.seed,
                                        condition=args.condition))


def cmd_cone_certify(args, run):
    run.attach(cone_certificate(args.a, args.m, args.radius))
    if args.s0_radius:
        run.attach(exp_s0_line(args.s0_radius))


def cmd_cone_explode(args, run):
    rep = cone_explode(args.alpha, args.radii)
    print(f"u(1,0) by radius: {_fmt_vec(rep.data['u_probe'])}")
    print("divergence-consistent" if rep.data["divergence_consistent"]
          else "not divergence-consistent")
    run.attach(rep)


def cmd_phi(args, run):
    p, q = phi_psi_eval(args.d, args.n, args.r)
    print(_fmt(p))
    if args.r:
        print(f"psi = {_fmt(q)}")
    run.results.update({"phi": p, "psi": q})


# parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="divsandpile", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=_seed, default=0, help="master seed (64-bit unsigned)")
        p.add_argument("--out", default=DEFAULT_OUT, help="output directory")
        p.add_argument("--csv", action="store_true", help="also write CSV data")
        return p

    def graph_flags(p):
        grp = p.add_mutually_exclusive_group()
        grp.add_argument("--torus", nargs=2, type=_positive_int, metavar=("N", "D"))
        grp.add_argument("--box", nargs=2, type=_positive_int, metavar=("R", "D"))

    def mass_flags(p):
        p.add_argument("--mass", type=_float_list, help="comma-separated masses, one per vertex")
        p.add_argument("--law", type=_law, default=parse_law("gaussian:1,1"),
                       help="i.i.d. mass law, e.g. gaussian:1,1 or two_point:1,1")

    p = add("stabilize", cmd_stabilize, "stabilize a configuration by toppling")
    graph_flags(p)
    mass_flags(p)
    p.add_argument("--critical", action="store_true", help="recentre a drawn law to mean 1")
    p.add_argument("--radii", type=_int_list, help="nested ball radii, e.g. 2,4,8")
    p.add_argument("--nested-method", choices=["parallel", "active_set"], default="parallel")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-sweeps", type=_positive_int, default=10**6)

    p = add("odometer-exact", cmd_odometer_exact,
            "exact odometer of a configuration with total mass |V|")
    graph_flags(p)
    mass_flags(p)

    p = add("green", cmd_green, "Green function columns and kernel constants")
    p.add_argument("--kind", choices=["killed", "averaged", "dirichlet"], default="averaged")
    p.add_argument("--n", type=_positive_int)
    p.add_argument("--d", type=_positive_int, default=1)
    p.add_argument("--radius", type=_positive_int)
    p.add_argument("--z", type=_int_list, help="killing vertex coordinates")

    p = add("variogram", cmd_variogram, "field variogram E(eta_0 - eta_x)^2 on the torus")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--d", type=_positive_int, required=True)
    p.add_argument("--lag", type=int, nargs="+")

    p = add("sample-field", cmd_sample_field, "draw bi-Laplacian field samples")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--d", type=_positive_int, required=True)
    p.add_argument("--trials", type=_positive_int, default=1)
    p.add_argument("--method", choices=["spectral", "cholesky"], default="spectral")
    p.add_argument("--raw", action="store_true", help="do not min-shift")

    p = add("equality-in-law", cmd_equality, "odometer vs min-shifted field, in law")
    p.add_argument("--n", type=_positive_int, default=8)
    p.add_argument("--d", type=_positive_int, default=2)
    p.add_argument("--trials", type=_positive_int, default=2000)
    p.add_argument("--bootstrap", type=_positive_int, default=200)

    p = add("scaling", cmd_scaling, "expected odometer growth across torus sizes")
    p.add_argument("--d", type=_positive_int, required=True)
    p.add_argument("--n-list", type=_int_list, required=True)
    p.add_argument("--trials", type=_positive_int, default=200)
    p.add_argument("--cross-check", action="store_true",
                   help="compare with E max eta from raw field samples")

    p = add("clt", cmd_clt, "Green-weighted sum of critical masses vs a normal law")
    p.add_argument("--d", type=_positive_int, default=3)
    p.add_argument("--radii", type=_int_list, default=[8, 12, 16])
    p.add_argument("--trials", type=_positive_int, default=400)
    p.add_argument("--law", type=_law, default=parse_law("two_point:1,1"))

    p = add("dirac", cmd_dirac, "parallel toppling of 1 + beta delta_o vs walk transitions")
    p.add_argument("--n", type=_positive_int, default=9)
    p.add_argument("--d", type=_positive_int, default=1)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--t-max", type=_positive_int, default=50)

    p = add("density", cmd_density, "mean mass at the origin before and after stabilization")
    graph_flags(p)
    p.add_argument("--law", type=_law, default=parse_law("uniform:0.4,1.4"))
    p.add_argument("--trials", type=_positive_int, default=500)
    p.add_argument("--condition", choices=["reject", "recenter"], default="reject")

    p = add("cone-certify", cmd_cone_certify, "stabilization certificate for m 1_{C_a}")
    p.add_argument("--a", type=_fraction, default=Fraction(1, 2))
    p.add_argument("--m", type=float, default=1.25)
    p.add_argument("--radius", type=_positive_int, default=100)
    p.add_argument("--s0-radius", type=_positive_int, default=None,
                   help="also check the line configuration on this box")

    p = add("cone-explode", cmd_cone_explode, "nested odometer growth for (1+alpha) 1_{C_1}")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--radii", type=_int_list, default=[16, 32, 64, 128])

    p = add("phi", cmd_phi, "reference growth orders phi_d(n) and psi_d(n, r)")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=float, default=0.0)
    return top


def run(argv=None) -> int:
    """Parse ``argv``, run the subcommand and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    state = _Run(args)
    try:
        args.func(args, state)
    except (UsageError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return state.finish()


def main() -> None:
    sys.exit(run())
