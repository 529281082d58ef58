"""``histq`` command-line front end.

Exit codes: 0 when every query passes, 1 when an expectation fails or a
query errors, 2 for parse and usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import fr
from .errors import HistqError, ScenarioError
from .histories import DEFAULT_TOL, decoherence_functional
from .scenario import format_number, parse_query, parse_scenario, run

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _tolerance(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("tolerance must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=_tolerance, default=DEFAULT_TOL,
                        help="consistency tolerance on off-diagonal |D| (default 1e-10)")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--force", action="store_true",
                        help="compute probabilities on inconsistent families (flagged)")

    p = _Parser(prog="histq", description="Consistent-histories scenario runner.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("validate", parents=[common], help="parse a scenario file only")
    s.add_argument("file")
    s = sub.add_parser("run", parents=[common], help="run every query in a scenario file")
    s.add_argument("file")
    s = sub.add_parser("consistency", parents=[common], help="decoherence report of a family")
    s.add_argument("file")
    s.add_argument("family")
    s = sub.add_parser("prob", parents=[common], help="ad-hoc probability query")
    s.add_argument("file")
    s.add_argument("--family", required=True)
    s.add_argument("events", help='e.g. "w1ok@t4 & w2ok@t5"')
    s = sub.add_parser("condprob", parents=[common], help="ad-hoc conditional probability")
    s.add_argument("file")
    s.add_argument("--family", required=True)
    s.add_argument("events", help='e.g. "bup@t3 | w1ok@t4"')
    sub.add_parser("fr-report", parents=[common], help="run the built-in model")
    return p


def _load(path: str):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    name = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return parse_scenario(text, name=name)


def _emit_report(report, fmt: str, extra: str = "") -> int:
    if fmt == "json":
        sys.stdout.write(report.to_json())
    else:
        sys.stdout.write(report.to_text() + extra)
    return EXIT_OK if report.ok else EXIT_FAIL


def _cmd_validate(args) -> int:
    m = _load(args.file)
    info = {"scenario": m.name, "dim": m.space.total_dim, "steps": len(m.intervals),
            "contexts": len(m.contexts), "families": len(m.families),
            "queries": len(m.queries)}
    if args.format == "json":
        sys.stdout.write(json.dumps(info, indent=2) + "\n")
    else:
        sys.stdout.write(f"ok: {m.name}: dim {info['dim']}, {info['steps']} steps, "
                         f"{info['contexts']} contexts, {info['families']} families, "
                         f"{info['queries']} queries\n")
    return EXIT_OK


def _cmd_consistency(args) -> int:
    m = _load(args.file)
    rep = decoherence_functional(m.family(args.family), m.initial, m.schedule, args.tol)
    diag = [format_number(x) for x in np.real(np.diag(rep.matrix))]
    witness = None
    if not rep.consistent:
        a, b = rep.witness_labels
        witness = {"alpha": list(a), "beta": list(b),
                   "magnitude": format_number(rep.max_offdiag)}
    out = {"family": args.family, "histories": rep.family.size,
           "consistent": rep.consistent, "max_offdiag": format_number(rep.max_offdiag),
           "witness": witness, "diagonal": diag, "tolerance": args.tol}
    if args.format == "json":
        sys.stdout.write(json.dumps(out, indent=2) + "\n")
        return EXIT_OK
    lines = [f"family {args.family}: {rep.family.size} atomic histories",
             f"consistent: {'yes' if rep.consistent else 'no'} "
             f"(max off-diagonal |D| = {out['max_offdiag']!r}, tolerance {args.tol:g})"]
    if witness:
        lines.append(f"witness: ({', '.join(witness['alpha'])}) x ({', '.join(witness['beta'])})")
    for alpha, d in zip(rep.family.atomic_grid, diag):
        if d != 0.0:
            lines.append(f"  D[{', '.join(rep.family.labels(alpha))}] = {d!r}")
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def _cmd_adhoc(args) -> int:
    m = _load(args.file)
    q = parse_query(f"{args.command} {args.family} : {args.events}", m)
    return _emit_report(run(m, tol=args.tol, force=args.force, queries=[q]), args.format)


def _fr_extra(model, tol: float) -> str:
    rep = fr.fr_four_time(model, tol)
    alpha, beta = fr.witness_pair(model)
    u, v = fr.witness_chain_vectors(model)
    lines = [
        "",
        f"four-time family F1345: {rep.family.size} atomic histories, "
        f"consistent: {'yes' if rep.consistent else 'no'}",
        f"  |D({', '.join(fr.WITNESS_ALPHA)}; {', '.join(fr.WITNESS_BETA)})| = "
        f"{format_number(abs(rep.entry(alpha, beta)))!r}",
        f"  chain vectors coincide: max |difference| = {format_number(np.abs(u - v).max())!r}, "
        f"norm {format_number(np.linalg.norm(u))!r}",
    ]
    return "\n".join(lines) + "\n"


def _cmd_fr_report(args) -> int:
    model = fr.build_fr()
    report = run(model, tol=args.tol, force=args.force)
    extra = _fr_extra(model, args.tol) if args.format == "text" else ""
    return _emit_report(report, args.format, extra)


def _cmd_run(args) -> int:
    m = _load(args.file)
    return _emit_report(run(m, tol=args.tol, force=args.force), args.format)


COMMANDS = {
    "validate": _cmd_validate,
    "run": _cmd_run,
    "consistency": _cmd_consistency,
    "prob": _cmd_adhoc,
    "condprob": _cmd_adhoc,
    "fr-report": _cmd_fr_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ScenarioError, OSError) as e:
        print(f"histq: {e}", file=sys.stderr)
        return EXIT_USAGE
    except HistqError as e:
        print(f"histq: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
