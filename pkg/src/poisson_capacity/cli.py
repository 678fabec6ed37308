"""``poisson-capacity`` command line: solve, bounds, verify, sweep.

Exit codes: 0 success, 1 usage or malformed input, 2 non-convergence,
3 verification or invariant failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import document as docio
from .bounds import bounds_report
from .channel import ChannelParams, DomainError
from .solver import SolverConfig, solve
from .sweep import records_to_csv, run_sweep, support_nondecreasing, transition_rows, trend_slope, write_csv
from .verify import verify_solution

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; 2 is reserved for non-convergence here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _params(args) -> ChannelParams:
    try:
        return ChannelParams(args.amplitude, args.dark_current)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc


def _config(args) -> SolverConfig:
    values = {}
    if getattr(args, "config", None):
        try:
            values.update(docio.read_config_file(args.config))
        except (OSError, docio.MalformedDocument) as exc:
            raise UsageError(f"config: {exc}") from exc
    if getattr(args, "kkt_tol", None) is not None:
        values["kkt_tolerance"] = args.kkt_tol
    try:
        return SolverConfig.from_mapping(values)
    except (KeyError, ValueError, DomainError) as exc:
        raise UsageError(f"config: {exc}") from exc


def _emit(text: str, out: str | None) -> None:
    if out and out != "-":
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    params, config = _params(args), _config(args)
    sol = solve(params, config)
    _emit(docio.dumps(docio.solution_document(sol, params, config)), args.out)
    pts = ", ".join(f"{x:.6g}:{p:.6g}" for x, p in zip(sol.input.points, sol.input.probs))
    print(
        f"A={params.amplitude:g} lambda={params.dark_current:g} C={sol.capacity_nats:.12g} nats "
        f"({sol.capacity_bits:.12g} bits) N={sol.support_size} kkt_gap={sol.kkt_gap:.3e} "
        f"{'converged' if sol.converged else 'NOT CONVERGED'}\n  support {{{pts}}}",
        file=sys.stderr,
    )
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


def cmd_bounds(args) -> int:
    params = _params(args)
    _emit(json.dumps(bounds_report(params).as_dict(), indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        params, inp, config, doc = docio.load_solution(args.solution)
    except docio.MalformedDocument as exc:
        print(f"malformed solution document: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except docio.InvariantViolation as exc:
        print(f"[FAIL] invariant: {exc}\nverification FAILED", file=sys.stdout)
        return EXIT_VERIFY
    report = verify_solution(inp, params, doc["capacity_nats"], config, doc["y_max"])
    _emit(report.render() + "\n", args.out)
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_sweep(args) -> int:
    if not 0 < args.amin < args.amax:
        raise UsageError("need 0 < --amin < --amax")
    if args.count < 2:
        raise UsageError("--count must be at least 2")
    if args.dark_current < 0:
        raise UsageError("--dark-current must be >= 0")
    config = _config(args)
    rows = run_sweep(args.amin, args.amax, args.count, args.dark_current, config)
    if args.out and args.out != "-":
        write_csv(args.out, rows)
    else:
        sys.stdout.write(records_to_csv(rows))
    if not support_nondecreasing(rows):
        print("warning: support size is not nondecreasing in A", file=sys.stderr)
    trans = transition_rows(rows)
    print(f"{len(rows)} rows, {sum(not r.converged for r in rows)} not converged, "
          f"{len(trans)} transition rows, slope of bits vs log2 N: {trend_slope(rows):.4f}", file=sys.stderr)
    return EXIT_OK if all(r.converged for r in rows) else EXIT_NOT_CONVERGED


def _add_channel(p: argparse.ArgumentParser) -> None:
    p.add_argument("--amplitude", type=float, required=True, help="peak input constraint A > 0")
    p.add_argument("--dark-current", type=float, default=0.0, help="dark current lambda >= 0")


def _add_solver(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kkt-tol", type=float, default=None, help="KKT tolerance in nats")
    p.add_argument("--config", help="key=value file overriding solver defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="poisson-capacity", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="capacity and optimal input for one (A, lambda)")
    _add_channel(p)
    _add_solver(p)
    p.add_argument("--out", help="solution document path (default stdout)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bounds", help="closed-form support and location bounds")
    _add_channel(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("verify", help="check a solution document")
    p.add_argument("--solution", required=True)
    p.add_argument("--out", help="report path (default stdout)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="solve over log-spaced amplitudes, write CSV")
    p.add_argument("--amin", type=float, default=0.1)
    p.add_argument("--amax", type=float, default=60.0)
    p.add_argument("--count", type=int, default=30)
    p.add_argument("--dark-current", type=float, default=0.0)
    _add_solver(p)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
