"""Command-line front end.

Every command prints JSON (or CSV with ``--out csv``) with floats at 12
significant digits.  Exit status: 0 on success, 2 when ``compare`` finds a
deviation beyond tolerance, 1 on any error.  ``ARTIFACT_THREADS`` sets the
default number of worker threads for simulations.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Sequence

from . import rcm
from .coulomb import g_beta_numeric
from .conformal import RectangleSpec, marked_points_halfplane
from .errors import ArtifactError, ValidationError
from .linkpat import enumerate_patterns, meander_matrix, parse_pattern
from .partition import CouplingParams, f_beta, point_config
from .predict import CrossingDistribution, crossing_distribution

DIGITS = 12
THREADS_ENV = "ARTIFACT_THREADS"
THEORY, ENUMERATION, MONTE_CARLO = "theory", "enumeration", "monte-carlo"


def fmt(value: float) -> float:
    return float(f"{value:.{DIGITS}g}")


def parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise ValidationError(f"malformed number list {text!r}") from exc


def parse_rect(text: str) -> tuple[float, float, list[float]]:
    """``"W,H"`` or ``"W,H:p1,p2,..."``; positions are boundary arc lengths from the top-left corner."""
    sides, _, positions = text.partition(":")
    dims = parse_floats(sides)
    if len(dims) != 2:
        raise ValidationError(f"rectangle needs width and height, got {text!r}")
    return dims[0], dims[1], parse_floats(positions) if positions else []


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError as exc:
        raise ValidationError(f"{THREADS_ENV} must be an integer") from exc


# ----------------------------------------------------------------------------
# reports


@dataclass
class RunReport:
    """Outcome of a command; every value sits under its provenance label."""

    command: str
    inputs: dict
    values: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    def add(self, provenance: str, dist: CrossingDistribution) -> None:
        if provenance not in (THEORY, ENUMERATION, MONTE_CARLO):
            raise ValueError(f"unknown provenance {provenance!r}")
        self.values[provenance] = dist.to_dict(DIGITS)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_dict(self) -> dict:
        out = {"command": self.command, "inputs": self.inputs, "values": self.values}
        if self.checks:
            out["checks"] = self.checks
            out["passed"] = self.passed
        return out

    def to_csv(self) -> str:
        """Plot-ready rows: provenance, pattern, sample count, probability, standard error."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["provenance", "pattern", "count", "probability", "stderr"])
        for provenance, data in self.values.items():
            samples = data.get("samples", 0)
            for pattern, prob in data["probs"].items():
                count = round(prob * samples) if samples else ""
                writer.writerow([provenance, pattern, count, prob, data.get("stderr", {}).get(pattern, "")])
        return buf.getvalue()


def emit(report: RunReport, out: str) -> None:
    if out == "csv":
        sys.stdout.write(report.to_csv())
    else:
        sys.stdout.write(json.dumps(report.to_dict(), indent=2) + "\n")


# ----------------------------------------------------------------------------
# commands


def half_plane_points(args) -> list[float]:
    if args.points:
        return list(point_config(parse_floats(args.points)))
    if args.rect:
        width, height, positions = parse_rect(args.rect)
        if not positions:
            positions = list(RectangleSpec.corners(width, height).positions)
        return list(marked_points_halfplane(RectangleSpec(width, height, positions)))
    raise ValidationError("give the marked points with --points or --rect")


CONFIG_KEYS = ("beta", "q", "p", "sweeps", "burn_in", "chains", "seed")


def apply_config(args) -> None:
    """Fill arguments from a JSON run configuration.

    Keys: width, height, mesh, marked, beta, q, p, sweeps, burn_in, chains,
    seed.  Values in the file take precedence over command-line flags.
    """
    if not getattr(args, "config", None):
        return
    try:
        with open(args.config, encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read configuration {args.config!r}: {exc}") from exc
    if "width" in data and "height" in data:
        marked = data.get("marked")
        args.rect = f"{data['width']},{data['height']}" + (":" + ",".join(str(m) for m in marked) if marked else "")
    for key in CONFIG_KEYS:
        if key in data and hasattr(args, key):
            setattr(args, key, data[key])
    if args.beta is None or args.rect is None:
        raise ValidationError("configuration needs beta, width and height")


def lattice_polygon(args, n_links: int) -> rcm.LatticePolygon:
    if not args.rect:
        raise ValidationError("lattice commands need --rect W,H[:offsets]")
    width, height, positions = parse_rect(args.rect)
    if width != int(width) or height != int(height):
        raise ValidationError("lattice rectangle sides must be integers")
    if not positions:
        if n_links != 2:
            raise ValidationError("default corner marking needs N=2; give offsets after ':'")
        positions = list(rcm.corner_offsets(int(width), int(height)))
    if any(p != int(p) for p in positions):
        raise ValidationError("lattice offsets must be integers")
    return rcm.build_polygon(int(width), int(height), [int(p) for p in positions])


def cmd_patterns(args) -> int:
    patterns = enumerate_patterns(args.n)
    for pattern in patterns:
        if args.format == "index":
            print(pattern.index_form())
        elif args.format == "paren":
            print(pattern.paren_form())
        else:
            print(f"{pattern.index_form()}\t{pattern.paren_form()}")
    return 0


def cmd_meander(args) -> int:
    matrix = meander_matrix(args.n, args.q)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    labels = [p.index_form() for p in matrix.patterns]
    writer.writerow([""] + labels)
    for label, row in zip(labels, matrix.entries):
        writer.writerow([label] + [repr(fmt(v)) for v in row])
    return 0


def cmd_eval_f(args) -> int:
    beta = parse_pattern(args.beta)
    value = f_beta(beta, parse_floats(args.points))
    print(repr(fmt(value)))
    return 0


def cmd_eval_g(args) -> int:
    beta = parse_pattern(args.beta)
    value = g_beta_numeric(beta, parse_floats(args.points), CouplingParams(args.kappa), args.tol)
    print(repr(fmt(value)))
    return 0


def cmd_predict(args) -> int:
    beta = parse_pattern(args.beta)
    x = half_plane_points(args)
    report = RunReport("predict", {"beta": beta.index_form(), "points": [fmt(v) for v in x]})
    report.add(THEORY, crossing_distribution(beta, x, args.tol))
    emit(report, args.out)
    return 0


def _lattice_inputs(args, beta, poly) -> dict:
    return {
        "beta": beta.index_form(),
        "width": poly.width,
        "height": poly.height,
        "marked": list(poly.marked),
        "q": args.q,
        "p": fmt(_bond_p(args)),
    }


def _bond_p(args) -> float:
    return rcm.critical_p(args.q) if args.p is None else args.p


def cmd_enumerate(args) -> int:
    beta = parse_pattern(args.beta)
    poly = lattice_polygon(args, beta.n_links)
    report = RunReport("enumerate", _lattice_inputs(args, beta, poly))
    report.add(ENUMERATION, rcm.exact_distribution(poly, beta, args.q, _bond_p(args)))
    emit(report, args.out)
    return 0


def _simulate(args, beta, poly) -> CrossingDistribution:
    dynamics = "sw" if args.q == 2.0 else "glauber"
    run = rcm.run_chains(
        poly,
        beta,
        args.sweeps,
        chains=args.chains,
        seed=args.seed,
        burn_in=args.burn_in,
        p=_bond_p(args),
        dynamics=dynamics,
        q=args.q,
        threads=args.threads or default_threads(),
    )
    return rcm.estimate_probs(run.indices, beta=beta)


def cmd_simulate(args) -> int:
    beta = parse_pattern(args.beta)
    poly = lattice_polygon(args, beta.n_links)
    inputs = _lattice_inputs(args, beta, poly) | {"sweeps": args.sweeps, "chains": args.chains, "seed": args.seed}
    report = RunReport("simulate", inputs)
    report.add(MONTE_CARLO, _simulate(args, beta, poly))
    emit(report, args.out)
    return 0


def cmd_compare(args) -> int:
    """Monte Carlo against enumeration when the polygon is small enough, else against theory."""
    beta = parse_pattern(args.beta)
    poly = lattice_polygon(args, beta.n_links)
    inputs = _lattice_inputs(args, beta, poly) | {
        "sweeps": args.sweeps,
        "chains": args.chains,
        "seed": args.seed,
        "tol": args.tol,
        "se_factor": args.se_factor,
    }
    report = RunReport("compare", inputs)
    if poly.n_edges <= rcm.MAX_ENUMERATION_EDGES:
        provenance = ENUMERATION
        reference = rcm.exact_distribution(poly, beta, args.q, _bond_p(args))
    else:
        if args.q != 2.0:
            raise ValidationError("theory comparison is available for q = 2 only")
        provenance = THEORY
        rect = rcm.continuum_rectangle(poly)
        reference = crossing_distribution(beta, marked_points_halfplane(rect))
    report.add(provenance, reference)
    empirical = _simulate(args, beta, poly)
    report.add(MONTE_CARLO, empirical)
    for pattern in enumerate_patterns(beta.n_links):
        deviation = abs(empirical[pattern] - reference[pattern])
        allowed = args.tol + args.se_factor * empirical.stderr[pattern]
        report.checks.append(
            {
                "pattern": pattern.index_form(),
                "reference": provenance,
                "deviation": fmt(deviation),
                "allowed": fmt(allowed),
                "passed": bool(deviation <= allowed),
            }
        )
    emit(report, args.out)
    return 0 if report.passed else 2


# ----------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="artifact", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    pattern_help = "link pattern such as 1-4,2-3"
    points_help = "increasing real points, comma separated"
    rect_help = "rectangle W,H with optional marked positions after ':' (default: the four corners)"

    p = sub.add_parser("patterns", help="list link patterns in canonical order")
    p.add_argument("n", type=int, help="number of links")
    p.add_argument("--format", choices=("both", "index", "paren"), default="both")
    p.set_defaults(func=cmd_patterns)

    p = sub.add_parser("meander", help="meander matrix as CSV")
    p.add_argument("n", type=int, help="number of links")
    p.add_argument("--q", type=float, default=2.0, help="loop weight is sqrt(q)")
    p.set_defaults(func=cmd_meander)

    for name, func, help_text in (
        ("eval-f", cmd_eval_f, "explicit FK-Ising partition function"),
        ("eval-g", cmd_eval_g, "Coulomb-gas integral by quadrature"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("beta", nargs="?", help=pattern_help)
        p.add_argument("points_pos", nargs="?", metavar="points", help=points_help)
        p.add_argument("--beta", dest="beta_flag", help=pattern_help)
        p.add_argument("--points", help=points_help)
        if name == "eval-g":
            p.add_argument("--kappa", type=float, default=16.0 / 3.0)
            p.add_argument("--tol", type=float, default=1e-10, help="relative tolerance of the quadrature")
        p.set_defaults(func=func)

    p = sub.add_parser("predict", help="scaling-limit crossing probabilities")
    p.add_argument("--beta", required=True, help="boundary condition, " + pattern_help)
    p.add_argument("--points", help=points_help)
    p.add_argument("--rect", help=rect_help)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_predict)

    for name, func, help_text in (
        ("enumerate", cmd_enumerate, "exact law on a small lattice polygon"),
        ("simulate", cmd_simulate, "Monte Carlo law on a lattice polygon"),
        ("compare", cmd_compare, "Monte Carlo against enumeration or theory"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON run configuration; its values override the flags")
        p.add_argument("--beta", help="boundary condition, " + pattern_help)
        p.add_argument("--rect", help="lattice W,H with integer marked offsets after ':' (default: corners)")
        p.add_argument("--q", type=float, default=2.0, help="cluster weight")
        p.add_argument("--p", type=float, default=None, help="edge probability (default: critical)")
        p.add_argument("--out", choices=("json", "csv"), default="json")
        if name != "enumerate":
            p.add_argument("--sweeps", type=int, default=10_000, help="recorded sweeps per chain")
            p.add_argument("--chains", type=int, default=1)
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--burn-in", type=int, default=None, help="default: from a pilot run")
            p.add_argument("--threads", type=int, default=None, help=f"default: ${THREADS_ENV} or 1")
        if name == "compare":
            p.add_argument("--tol", type=float, default=0.0, help="absolute slack added to the allowance")
            p.add_argument("--se-factor", type=float, default=4.0, help="allowance in standard errors")
        p.set_defaults(func=func)
    return parser


def _merge_positionals(args) -> None:
    if hasattr(args, "beta_flag"):
        args.beta = args.beta_flag or args.beta
        args.points = args.points or args.points_pos
        if not args.beta or not args.points:
            raise ValidationError("give a pattern and a point list")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _merge_positionals(args)
        apply_config(args)
        if hasattr(args, "config") and (args.beta is None or args.rect is None):
            raise ValidationError("give --beta and --rect, or --config")
        return args.func(args)
    except (ArtifactError, ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
