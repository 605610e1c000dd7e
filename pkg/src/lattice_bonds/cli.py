"""Command-line interface: ``lattice-bonds <subcommand> ...``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Sequence

import numpy as np

from . import __version__
from . import io as lio
from .errors import BudgetExceeded, DegenerateTangent, LatticeError, NotConverged, SignError
from .families import FamilyPoint2D, FamilyPoint3D, GramPolytope
from .lattice import Lattice, bond_set, canonical, shells, BondConstraint
from .phases import (classify, find_transitions, global_optimum, lambda_grid, resolve_threads,
                     sweep)
from .potentials import LennardJones, epstein_zeta, energy, parse_potential, theta
from .structure import check_critical_point, check_strong_eutaxy, constrained_theta_hessian_pd
from .thresholds import ThresholdQuery, threshold

LATTICE_HELP = ("lattice: a name (Z2, A2, Z3, D3, D3star, SC(d)), 't=T' for the 2D family, "
                "'angles=t,theta,phi' for the 3D family, or 'gram=a11,a12,...' (row-major)")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def parse_lattice(text: str, lam: float = 1.0) -> Lattice:
    text = text.strip()
    if text.startswith("t="):
        return FamilyPoint2D(_floats(text[2:])[0]).lattice(lam)
    if text.startswith("angles="):
        vals = _floats(text[7:])
        if len(vals) != 3:
            raise UsageError("angles= needs t,theta,phi")
        return FamilyPoint3D(*vals).lattice(lam)
    if text.startswith("gram="):
        vals = _floats(text[5:])
        d = int(round(math.sqrt(len(vals))))
        if d * d != len(vals):
            raise UsageError("gram= needs d*d entries")
        return Lattice.from_gram(np.array(vals).reshape(d, d) * lam * lam)
    return canonical(text, lam)


def parse_grid(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) == 1:
        return [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise UsageError(f"lambda grid must be start:end:step, got {text!r}")
    start, end, step = (float(p) for p in parts)
    return lambda_grid(start, end, step)


def parse_range(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise UsageError(f"range must be lo:hi, got {text!r}")
    return float(parts[0]), float(parts[1])


def _positive(name):
    def conv(text):
        try:
            val = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number") from None
        if not val > 0:
            raise argparse.ArgumentTypeError(f"{name} must be positive")
        return val
    return conv


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="write structured results to this file (default: none)")
    p.add_argument("--format", default="csv", help="output file format: csv or json (default: csv)")


def _add_lattice(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--lattice", required=required, help=LATTICE_HELP)
    p.add_argument("--lambda", dest="lam", type=_positive("lambda"), default=1.0,
                   help="scale factor applied to the lattice (default: 1.0)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lattice-bonds", description="Lattice energies, eutaxy checks, "
                     "Lennard-Jones thresholds and phase sweeps.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("energy", help="lattice energy for a potential")
    _add_lattice(p)
    p.add_argument("--potential", required=True, help="lj:p,q,a,b | gauss:alpha | power:s")
    p.add_argument("--tol", type=_positive("tol"), default=1e-10, help="truncation tolerance (default: 1e-10)")
    _add_output(p)

    p = sub.add_parser("theta", help="lattice theta function")
    _add_lattice(p)
    p.add_argument("--alpha", type=_positive("alpha"), required=True)
    p.add_argument("--tol", type=_positive("tol"), default=1e-12, help="truncation tolerance (default: 1e-12)")
    _add_output(p)

    p = sub.add_parser("zeta", help="Epstein zeta function")
    _add_lattice(p)
    p.add_argument("--s", type=float, required=True, help="exponent, must exceed the dimension")
    p.add_argument("--tol", type=_positive("tol"), default=1e-12, help="truncation tolerance (default: 1e-12)")
    p.add_argument("--method", choices=("split", "direct"), default="split",
                   help="summation method (default: split)")
    _add_output(p)

    p = sub.add_parser("shells", help="shells of lattice vectors up to a squared radius")
    _add_lattice(p)
    p.add_argument("--r2", type=_positive("r2"), required=True, help="squared-radius cutoff")
    _add_output(p)

    p = sub.add_parser("eutaxy", help="strong-eutaxy check on the first shells")
    _add_lattice(p)
    p.add_argument("--shells", type=int, default=6, help="number of shells (default: 6)")
    p.add_argument("--tol", type=_positive("tol"), default=1e-8, help="relative tolerance (default: 1e-8)")
    _add_output(p)

    for name, helptext in (("critical", "constrained criticality of theta"),
                           ("hessian", "constrained theta Hessian positivity")):
        p = sub.add_parser(name, help=helptext)
        _add_lattice(p)
        p.add_argument("--bonds", default=None,
                       help="bond set name (Z2, A2, Z3, D3, D3star); default: the lattice's minimal vectors")
        p.add_argument("--alpha", type=_positive("alpha"), default=1.0, help="theta parameter (default: 1.0)")
        if name == "critical":
            p.add_argument("--tol", type=_positive("tol"), default=1e-8, help="relative residual tolerance (default: 1e-8)")
        else:
            p.add_argument("--probes", type=int, default=50, help="random tangent probes (default: 50)")
            p.add_argument("--seed", type=int, default=0, help="probe seed (default: 0)")
        _add_output(p)

    p = sub.add_parser("threshold", help="Lennard-Jones optimality threshold of a reference lattice")
    p.add_argument("--lattice", required=True, help="reference: Z2, A2 (2D); Z3, D3star, D3 (3D)")
    p.add_argument("--potential", default=None, help="lj:p,q,a,b (overrides --p/--q/--a/--b)")
    p.add_argument("--p", type=float, default=6.0, help="repulsive exponent (default: 6)")
    p.add_argument("--q", type=float, default=3.0, help="attractive exponent (default: 3)")
    p.add_argument("--a", type=float, default=1.0, help="repulsive weight (default: 1)")
    p.add_argument("--b", type=float, default=2.0, help="attractive weight (default: 2)")
    p.add_argument("--tol", type=_positive("tol"), default=1e-6, help="bracket tolerance (default: 1e-6)")
    _add_output(p)

    for dim in (2, 3):
        p = sub.add_parser(f"sweep{dim}d", help=f"phase sweep over the {dim}D family")
        p.add_argument("--potential", default="lj:6,3,1,2", help="potential (default: lj:6,3,1,2)")
        default_grid = "0.6:1.2:0.005" if dim == 2 else "0.70:1.05:0.005"
        p.add_argument("--lambda", dest="grid", default=default_grid,
                       help=f"start:end:step, inclusive (default: {default_grid})")
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes (default: available CPUs; LATTICE_THREADS overrides)")
        p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
        if dim == 3:
            p.add_argument("--random-seeds", type=int, default=200,
                           help="random descent starts per bond length (default: 200)")
        p.add_argument("--svg", default=None, help="also write an SVG chart of energy and label vs lambda")
        _add_output(p)

    p = sub.add_parser("transitions", help="bond lengths where the minimizing structure changes")
    p.add_argument("--potential", default="lj:6,3,1,2", help="potential (default: lj:6,3,1,2)")
    p.add_argument("--dimension", type=int, choices=(2, 3), default=2, help="family dimension (default: 2)")
    p.add_argument("--range", default=None, help="lo:hi (default: 0.6:1.2 in 2D, 0.70:1.05 in 3D)")
    p.add_argument("--step", type=_positive("step"), default=0.005, help="coarse step (default: 0.005)")
    p.add_argument("--bracket-tol", type=_positive("bracket-tol"), default=None,
                   help="bisection width (default: 1e-4 in 2D, 1e-3 in 3D)")
    p.add_argument("--threads", type=int, default=None, help="worker processes (default: available CPUs)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    p.add_argument("--random-seeds", type=int, default=200, help="3D random starts (default: 200)")
    _add_output(p)

    p = sub.add_parser("global-opt", help="joint minimum over bond length and family parameters")
    p.add_argument("--potential", default="lj:6,3,1,2", help="potential (default: lj:6,3,1,2)")
    p.add_argument("--dimension", type=int, choices=(2, 3), default=2, help="family dimension (default: 2)")
    p.add_argument("--range", default="0.8:1.3", help="lambda range lo:hi (default: 0.8:1.3)")
    p.add_argument("--tol", type=_positive("tol"), default=1e-6, help="golden-section tolerance (default: 1e-6)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    p.add_argument("--random-seeds", type=int, default=200, help="3D random starts (default: 200)")
    _add_output(p)

    p = sub.add_parser("classify", help="phase label of a family point")
    p.add_argument("--t", type=float, default=None, help="2D family angle")
    p.add_argument("--angles", default=None, help="3D family angles t,theta,phi")
    p.add_argument("--offdiag", default=None, help="off-diagonal Gram entries c12[,c13,c23]")
    _add_output(p)
    return parser


def _bonds(args, lattice: Lattice) -> BondConstraint:
    if args.bonds:
        return bond_set(args.bonds, lam=args.lam)
    return BondConstraint.of(lattice)


def _finish(args, rows, tolerances=None, seed=None, columns=None) -> None:
    if args.out:
        meta = lio.make_meta(args.command, seed=seed, tolerances=tolerances or {})
        lio.emit(rows, args.format, args.out, meta=meta, columns=columns)


def _cmd_energy(args):
    lat = parse_lattice(args.lattice, args.lam)
    f = parse_potential(args.potential)
    res = energy(lat, f, args.tol)
    print(f"E = {res.value:.15g}  (tail bound {res.tail_bound:.3g}, cutoff r^2 {res.cutoff_used:.6g})")
    _finish(args, [{"lattice": args.lattice, "lambda": args.lam, "potential": f.describe(),
                    "value": res.value, "tail_bound": res.tail_bound, "cutoff": res.cutoff_used}],
            {"tol": args.tol})


def _cmd_theta(args):
    lat = parse_lattice(args.lattice, args.lam)
    res = theta(lat, args.alpha, args.tol)
    print(f"theta({args.alpha:g}) = {res.value:.15g}  (tail bound {res.tail_bound:.3g})")
    _finish(args, [{"lattice": args.lattice, "lambda": args.lam, "alpha": args.alpha,
                    "value": res.value, "tail_bound": res.tail_bound, "cutoff": res.cutoff_used}],
            {"tol": args.tol})


def _cmd_zeta(args):
    lat = parse_lattice(args.lattice, args.lam)
    res = epstein_zeta(lat, args.s, args.tol, method=args.method)
    print(f"zeta({args.s:g}) = {res.value:.15g}  (tail bound {res.tail_bound:.3g})")
    _finish(args, [{"lattice": args.lattice, "lambda": args.lam, "s": args.s,
                    "value": res.value, "tail_bound": res.tail_bound, "cutoff": res.cutoff_used}],
            {"tol": args.tol})


def _cmd_shells(args):
    lat = parse_lattice(args.lattice, args.lam)
    dec = shells(lat, args.r2)
    rows = [{"shell": i, "r2": s.r2, "count": s.count} for i, s in enumerate(dec, start=1)]
    print(f"{len(dec)} shell(s) with r^2 <= {args.r2:g}")
    for row in rows:
        print(f"  {row['shell']:3d}  r^2 = {row['r2']:.12g}  count = {row['count']}")
    if rows:
        _finish(args, rows)


def _cmd_eutaxy(args):
    lat = parse_lattice(args.lattice, args.lam)
    rep = check_strong_eutaxy(lat, args.shells, args.tol)
    verdict = "strongly eutactic" if rep.is_strongly_eutactic else "not strongly eutactic"
    extra = "" if rep.first_failing_shell is None else f", first failing shell {rep.first_failing_shell}"
    print(f"{verdict} over {rep.shells_checked} shells (max deviation {rep.max_deviation:.3g}{extra})")
    _finish(args, [{"lattice": args.lattice, "eutactic": rep.is_strongly_eutactic,
                    "shells": rep.shells_checked, "max_deviation": rep.max_deviation}],
            {"tol": args.tol})


def _cmd_critical(args):
    lat = parse_lattice(args.lattice, args.lam)
    ok, resid = check_critical_point(lat, _bonds(args, lat), args.alpha, args.tol)
    print(f"{'critical' if ok else 'not critical'} (relative residual {resid:.3g})")
    _finish(args, [{"lattice": args.lattice, "alpha": args.alpha, "critical": ok, "residual": resid}],
            {"tol": args.tol})


def _cmd_hessian(args):
    lat = parse_lattice(args.lattice, args.lam)
    try:
        rep = constrained_theta_hessian_pd(lat, _bonds(args, lat), args.alpha, args.probes, args.seed)
    except DegenerateTangent:
        print("rigid: the bond constraints fix the Gram matrix (vacuously convex)")
        _finish(args, [{"lattice": args.lattice, "alpha": args.alpha, "positive_definite": True,
                        "min_eigenvalue": None, "tangent_dim": 0}], seed=args.seed)
        return
    print(f"{'positive definite' if rep.positive_definite else 'not positive definite'} "
          f"(min eigenvalue {rep.min_eigenvalue:.6g}, tangent dim {rep.tangent_dim})")
    _finish(args, [{"lattice": args.lattice, "alpha": args.alpha,
                    "positive_definite": rep.positive_definite, "min_eigenvalue": rep.min_eigenvalue,
                    "tangent_dim": rep.tangent_dim}], seed=args.seed)


def _cmd_threshold(args):
    f = parse_potential(args.potential) if args.potential else LennardJones(args.p, args.q, args.a, args.b)
    if not isinstance(f, LennardJones):
        raise UsageError("threshold needs a Lennard-Jones potential")
    query = ThresholdQuery.for_reference(args.lattice, f)
    res = threshold(query, args.tol)
    name = "lambda0" if query.mode == "lambda0_inf" else "lambda1"
    where = "at the reference (limit)" if res.at_reference else f"at {res.argmin_parameter}"
    print(f"{name}({query.reference}, {f.describe()}) = {res.lambda_star:.10f}  {where}")
    print(f"  bracket [{res.bracket[0]:.12g}, {res.bracket[1]:.12g}]")
    _finish(args, [{"reference": query.reference, "mode": query.mode, "potential": f.describe(),
                    "lambda_star": res.lambda_star, "bracket_lo": res.bracket[0],
                    "bracket_hi": res.bracket[1], "at_reference": res.at_reference}],
            {"tol": args.tol})


def _cmd_sweep(args, dimension):
    f = parse_potential(args.potential)
    grid = parse_grid(args.grid)
    if not grid or any(x <= 0 for x in grid):
        raise UsageError("lambda grid must contain positive values")
    n_random = getattr(args, "random_seeds", 200)
    points = sweep(grid, f, dimension, threads=resolve_threads(args.threads), seed=args.seed,
                   n_random=n_random)
    rows = lio.phase_rows(points, dimension)
    runs = []
    for p in points:
        if not runs or runs[-1][0] != p.label:
            runs.append([p.label, p.lam, p.lam])
        runs[-1][2] = p.lam
    print(f"{len(points)} bond lengths, {f.describe()}:")
    for label, lo, hi in runs:
        print(f"  {label:<10s} {lo:.4f} .. {hi:.4f}")
    tolerances = {"descent_gtol": 1e-10, "label_tol": 1e-6}
    if args.out:
        meta = lio.make_meta(args.command, seed=args.seed, tolerances=tolerances,
                             potential=f.describe(), grid=args.grid,
                             **({"random_seeds": n_random} if dimension == 3 else {}))
        lio.emit(rows, args.format, args.out, meta=meta)
    if args.svg:
        order = {lab: i for i, lab in enumerate(("Square", "Rhombic2D", "Triangular") if dimension == 2
                                                else ("SC", "Rhombic3D", "BCC", "FCC"))}
        lams = [p.lam for p in points]
        energy_svg = lio.svg_line_chart({"energy": (lams, [p.energy for p in points])},
                                        title=f"Family minimum, {f.describe()}", xlabel="lambda",
                                        ylabel="energy")
        label_svg = lio.svg_line_chart(
            {"phase": (lams, [float(order.get(p.label, math.nan)) for p in points])},
            title="Minimizing structure", xlabel="lambda", ylabel="phase",
            ytick_labels={float(v): k for k, v in order.items()})
        lio.write_text(args.svg, energy_svg)
        stem = args.svg[:-4] if args.svg.endswith(".svg") else args.svg
        lio.write_text(stem + "_labels.svg", label_svg)


def _cmd_transitions(args):
    f = parse_potential(args.potential)
    rng = parse_range(args.range) if args.range else None
    found = find_transitions(f, args.dimension, rng, args.step, args.bracket_tol,
                             threads=resolve_threads(args.threads), seed=args.seed,
                             n_random=args.random_seeds)
    if not found:
        print("no transitions in range")
    for tr in found:
        print(f"  {tr.label_a} -> {tr.label_b} at lambda = {tr.lambda_star:.6f} "
              f"[{tr.bracket[0]:.6f}, {tr.bracket[1]:.6f}]")
    rows = [{"from": t.label_a, "to": t.label_b, "lambda_star": t.lambda_star,
             "bracket_lo": t.bracket[0], "bracket_hi": t.bracket[1]} for t in found]
    if rows:
        _finish(args, rows, {"bracket_tol": args.bracket_tol or (1e-4 if args.dimension == 2 else 1e-3)},
                seed=args.seed)


def _cmd_global(args):
    f = parse_potential(args.potential)
    lo, hi = parse_range(args.range)
    lam, point, boundary = global_optimum(f, args.dimension, (lo, hi), args.tol, args.seed,
                                          args.random_seeds)
    note = " (boundary optimum)" if boundary else ""
    print(f"lambda_opt = {lam:.8f}, {point.label}, energy {point.energy:.12g}{note}")
    _finish(args, [{"lambda_opt": lam, "label": point.label, "energy": point.energy,
                    "boundary": boundary}], {"tol": args.tol}, seed=args.seed)


def _cmd_classify(args):
    if args.t is not None:
        point = FamilyPoint2D(args.t)
    elif args.angles:
        vals = _floats(args.angles)
        if len(vals) != 3:
            raise UsageError("--angles needs t,theta,phi")
        point = FamilyPoint3D(*vals)
    elif args.offdiag:
        vals = _floats(args.offdiag)
        if len(vals) not in (1, 3):
            raise UsageError("--offdiag needs 1 (2D) or 3 (3D) entries")
        poly = GramPolytope.family(2 if len(vals) == 1 else 3)
        if not poly.contains(np.array(vals), 1e-12)[0]:
            raise UsageError("off-diagonal entries are outside the admissible family")
        point = FamilyPoint2D.from_offdiag(vals) if len(vals) == 1 else FamilyPoint3D.from_offdiag(vals)
    else:
        raise UsageError("classify needs --t, --angles or --offdiag")
    if isinstance(point, FamilyPoint3D) and not point.is_admissible():
        raise UsageError("3D point is not admissible: a vector shorter than the unit bonds exists")
    label = classify(point)
    print(label)
    _finish(args, [{"params": ",".join(f"{x:.15g}" for x in point.params), "label": label}])


COMMANDS = {
    "energy": _cmd_energy, "theta": _cmd_theta, "zeta": _cmd_zeta, "shells": _cmd_shells,
    "eutaxy": _cmd_eutaxy, "critical": _cmd_critical, "hessian": _cmd_hessian,
    "threshold": _cmd_threshold, "sweep2d": lambda a: _cmd_sweep(a, 2),
    "sweep3d": lambda a: _cmd_sweep(a, 3), "transitions": _cmd_transitions,
    "global-opt": _cmd_global, "classify": _cmd_classify,
}


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return 1
        if hasattr(args, "format"):
            args.format = (args.format or "csv").lower()
        if getattr(args, "format", "csv") not in lio.FORMATS:
            raise UsageError(f"--format must be csv or json, got {args.format!r}")
        COMMANDS[args.command](args)
    except (NotConverged, BudgetExceeded, SignError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ValueError, LatticeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
