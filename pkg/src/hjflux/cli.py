"""Command-line front end.

Exit codes: 0 when every check passes, 2 when a check fails, 1 on errors
(bad arguments, unreadable or invalid configs, solver failures).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import catalog, config
from .errors import HJFluxError
from .geometry import BOUNDARY, INTERIOR, LABEL_NAMES
from .verification import _fmt, equivalence_experiment, operator_identity_suite, rows_to_csv, slope_survey

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2
COMMANDS = ("solve", "oracle", "equivalence", "identities", "slopes")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _resolutions(text: str) -> list[int]:
    try:
        res = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not res or any(n < 1 for n in res):
        raise argparse.ArgumentTypeError("resolutions must be positive integers")
    if any(b <= a for a, b in zip(res, res[1:])):
        raise argparse.ArgumentTypeError("resolutions must be strictly increasing")
    return res


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hjflux", description="Flux-limited versus state-constraint Hamilton-Jacobi solver.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "solve": "solve one problem and write its fields",
        "oracle": "dynamic-programming reference solution (1D, convex H)",
        "equivalence": "compare both boundary closures over a resolution ladder",
        "identities": "envelope and flux-limiter identities over the catalog",
        "slopes": "critical-slope probes at every boundary node",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--spec", required=name != "identities", help="problem JSON file")
        p.add_argument("--out", help="output directory (default: print the main table to stdout)")
        p.add_argument("--format", choices=("csv", "json", "both"), default="csv")
        if name == "equivalence":
            p.add_argument("--resolutions", type=_resolutions, help="comma-separated, strictly increasing")
    return parser


def field_csv(positions, values, labels) -> str:
    dim = positions.shape[1]
    cols = ("x",) if dim == 1 else ("x", "y")
    rows = [[*(_fmt(c) for c in X), _fmt(v), LABEL_NAMES[int(lab)]] for X, v, lab in zip(positions, values, labels)]
    return rows_to_csv((*cols, "u", "label"), rows)


def _time_tag(t: float) -> str:
    return "steady" if not np.isfinite(t) else f"t{_fmt(t)}"


class _Sink:
    """Collects named outputs and writes them to ``--out`` or stdout."""

    def __init__(self, out: str | None, fmt: str):
        self.out = None if out is None else Path(out)
        self.fmt = fmt
        self.written: list[Path] = []
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)

    def table(self, stem: str, csv_text: str, json_text: str | None = None):
        if self.out is None:
            sys.stdout.write(json_text if self.fmt == "json" and json_text is not None else csv_text)
            return
        if self.fmt in ("csv", "both") or json_text is None:
            self._write(f"{stem}.csv", csv_text)
        if self.fmt in ("json", "both") and json_text is not None:
            self._write(f"{stem}.json", json_text)

    def file(self, name: str, text: str):
        if self.out is not None:
            self._write(name, text)

    def _write(self, name: str, text: str):
        path = self.out / name
        path.write_text(text)
        self.written.append(path)

    def report(self):
        for path in self.written:
            print(path)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, default=lambda x: x.item() if isinstance(x, np.generic) else str(x)) + "\n"


def _cmd_solve(args, sink: _Sink) -> int:
    from .solver import solve

    spec = config.load(args.spec)
    rep = solve(spec)
    if sink.out is None:
        sys.stdout.write(field_csv(rep.positions, rep.field, rep.labels))
    for t, u in zip(rep.times, rep.fields):
        sink.file(f"{spec.name}_{_time_tag(t)}.csv", field_csv(rep.positions, u, rep.labels))
    if args.format in ("json", "both"):
        summary = {"problem": spec.name, "n": spec.n, "h": rep.h, "bc": spec.bc.mode,
                   "times": [None if not np.isfinite(t) else t for t in rep.times],
                   "iterations": rep.iterations, "converged": rep.converged, "dt": rep.dt,
                   "final_residual": rep.diagnostics.get("final_residual")}
        sink.file(f"{spec.name}_solve.json", _dump_json(summary))
    return EXIT_OK


def _cmd_oracle(args, sink: _Sink) -> int:
    from .oracle import oracle_for_spec
    from .solver import _time_step, discretize, initial_field

    spec = config.load(args.spec)
    disc = discretize(spec)
    dt, _, _ = _time_step(disc, initial_field(spec.init, spec.domain, disc.grid.positions), spec.cfl)
    orc = oracle_for_spec(spec, dt)
    pos = orc.x[:, None]
    labels = np.full(len(orc.x), INTERIOR)
    labels[[0, -1]] = BOUNDARY
    if sink.out is None:
        sys.stdout.write(field_csv(pos, orc.fields[-1], labels))
    for t, u in zip(orc.times, orc.fields):
        sink.file(f"{spec.name}_oracle_{_time_tag(t)}.csv", field_csv(pos, u, labels))
    if args.format in ("json", "both"):
        sink.file(f"{spec.name}_oracle.json",
                  _dump_json({"problem": spec.name, "points": len(orc.x), "dt": orc.dt,
                              "iterations": orc.iterations,
                              "times": [None if not np.isfinite(t) else t for t in orc.times],
                              "info": {k: v for k, v in orc.info.items() if np.isscalar(v)}}))
    return EXIT_OK


def _cmd_equivalence(args, sink: _Sink) -> int:
    spec = config.load(args.spec)
    res = args.resolutions or list(catalog.resolutions(spec))
    rep = equivalence_experiment(spec.replace(n=res[0]), res)
    sink.table(f"{spec.name}_equivalence", rep.to_csv(), rep.to_json())
    return EXIT_OK if rep.passed else EXIT_FAILED


def _cmd_identities(args, sink: _Sink) -> int:
    hams = None
    stem = "identities"
    if args.spec:
        spec = config.load(args.spec)
        hams = {spec.name: spec.hamiltonian}
        stem = f"{spec.name}_identities"
    rep = operator_identity_suite(hams)
    sink.table(stem, rep.to_csv(), rep.to_json())
    return EXIT_OK if rep.passed else EXIT_FAILED


SLOPE_COLUMNS = ("node", "side", "pbar", "threshold", "radius", "curvature", "pass")


def _cmd_slopes(args, sink: _Sink) -> int:
    from .solver import solve

    spec = config.load(args.spec)
    survey = slope_survey(solve(spec))
    rows = [[r["node"], r["side"], _fmt(r["pbar"]), _fmt(r["threshold"]), _fmt(r["radius"]), _fmt(r["curvature"]),
             _fmt(r["pass"])] for r in survey["rows"]]
    sink.table(f"{spec.name}_slopes", rows_to_csv(SLOPE_COLUMNS, rows), _dump_json(survey))
    return EXIT_OK if survey["pass"] else EXIT_FAILED


_HANDLERS = {"solve": _cmd_solve, "oracle": _cmd_oracle, "equivalence": _cmd_equivalence,
             "identities": _cmd_identities, "slopes": _cmd_slopes}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sink = _Sink(args.out, args.format)
        code = _HANDLERS[args.command](args, sink)
    except (HJFluxError, OSError, ValueError) as exc:
        print(f"hjflux {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    sink.report()
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
