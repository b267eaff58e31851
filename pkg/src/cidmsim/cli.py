"""Command-line front end.

Exit codes: 0 success, 1 input or parse error, 2 validation failure,
3 runtime failure. Errors print one JSON line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import analysis, io
from .circuit import validate_compatibility, validate_structure
from .delay import SwitchingWaveform
from .engine import CircuitError, SimulationError, run

EXIT_OK, EXIT_INPUT, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, code, kind, message):
        super().__init__(message)
        self.code, self.kind = code, kind


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliError(EXIT_INPUT, "io", f"{path}: {exc.strerror or exc}") from None


def _load_netlist(path):
    try:
        return io.load_netlist(_read(path))
    except io.FormatError as exc:
        raise CliError(EXIT_INPUT, "parse", f"{path}: {exc}") from None


def _load_stimulus(path):
    if path is None:
        return {}
    try:
        return io.load_stimulus(_read(path))
    except io.FormatError as exc:
        raise CliError(EXIT_INPUT, "parse", f"{path}: {exc}") from None


def cmd_validate(args):
    c = _load_netlist(args.netlist)
    violations = validate_structure(c)
    for v in violations:
        print(f"structure {v.rule} {v.vertex}: {v.message}")
    if violations:
        raise CliError(EXIT_VALIDATION, "structure", "; ".join(map(str, violations)))
    rep = validate_compatibility(c)
    print("edge,causal,up_margin,down_margin")
    for r in rep.edges:
        e = r.edge
        print(f"{e.source}->{e.target}[{e.index}],{int(r.causal)},{r.up_margin!r},{r.down_margin!r}")
    if not rep.ok:
        names = ", ".join(f"{r.edge.source}->{r.edge.target}[{r.edge.index}]" for r in rep.failures)
        raise CliError(EXIT_VALIDATION, "compatibility", f"incompatible edge(s): {names}")
    print("ok")


def cmd_simulate(args):
    c = _load_netlist(args.netlist)
    stim = _load_stimulus(args.stimulus)
    formats = tuple(f.strip() for f in args.format.split(","))
    bad = set(formats) - {"csv", "vcd"}
    if bad:
        raise CliError(EXIT_INPUT, "usage", f"unknown format(s) {sorted(bad)}")
    res = run(c, stim, args.until, interconnect=args.interconnect, trace=args.trace_events)
    out = args.out or io.default_out_dir()
    files = io.write_result(res, out, formats, timescale=args.timescale)
    print(json.dumps({"events": res.event_count, "files": [str(p) for p in files]}))


def _parse_refs(specs, observe, vdd):
    refs = {}
    for s in specs:
        if "=" in s:
            name, path = s.split("=", 1)
        elif len(observe) == 1:
            name, path = observe[0], s
        else:
            raise CliError(EXIT_INPUT, "usage", "use NAME=PATH for --reference when several signals are observed")
        try:
            refs[name] = io.load_reference_csv(_read(path), vdd)
        except io.FormatError as exc:
            raise CliError(EXIT_INPUT, "parse", f"{path}: {exc}") from None
    return refs


def cmd_compare(args):
    c = _load_netlist(args.netlist_base)
    stim = _load_stimulus(args.stimulus)
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    if "inertial" not in models:
        models.append("inertial")
    try:
        variants = analysis.model_variants(c, models)
    except analysis.AnalysisError as exc:
        raise CliError(EXIT_INPUT, "usage", str(exc)) from None
    refs = _parse_refs(args.reference, list(c.observe), args.vdd)
    try:
        rep = analysis.compare_models(variants, stim, refs, (args.start, args.until), vth=args.vth)
    except analysis.AnalysisError as exc:
        raise CliError(EXIT_INPUT, "reference", str(exc)) from None
    rows = [["model", "area", "normalized"]]
    for m, a, n in rep.rows():
        rows.append([m, repr(a), repr(n)])
    width = max(len(r[0]) for r in rows)
    for r in rows:
        print(f"{r[0]:<{width}}  {r[1]:>22}  {r[2]:>22}")
    if rep.note:
        print(rep.note)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", "signal", "area", "normalized"])
            for m in rep.absolute:
                for sig, a in rep.per_signal[m].items():
                    w.writerow([m, sig, repr(a), ""])
                w.writerow([m, "*", repr(rep.absolute[m]),
                            repr(rep.normalized[m]) if rep.normalized else ""])


def cmd_gen_stimulus(args):
    spec = analysis.PulseTrainSpec(args.count, args.mu, args.sigma, args.gap_mu, args.gap_sigma,
                                   args.seed, args.floor, args.start, args.initial)
    text = io.save_stimulus({args.port: analysis.generate_pulse_train(spec)})
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)


def _waveforms(text):
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError:
        parts = []
    if len(parts) not in (2, 3):
        raise CliError(EXIT_INPUT, "usage", "--waveforms expects TAU_RISE,TAU_FALL[,VDD]")
    vdd = parts[2] if len(parts) == 3 else 1.0
    return SwitchingWaveform(True, parts[0], vdd), SwitchingWaveform(False, parts[1], vdd)


def cmd_reconstruct(args):
    text = _read(args.trace)
    try:
        files = io.read_tct_csv(text)
    except (KeyError, ValueError) as exc:
        raise CliError(EXIT_INPUT, "parse", f"{args.trace}: {exc}") from None
    if args.vertex not in files:
        raise CliError(EXIT_INPUT, "usage", f"vertex {args.vertex!r} not in {args.trace}")
    a = analysis.reconstruct_analog(files[args.vertex], _waveforms(args.waveforms), args.vth, args.step,
                                    args.t0, args.t1)
    Path(args.out).write_text(io.save_reference_csv(a))
    if a.jumps:
        print(json.dumps({"jumps": [list(j) for j in a.jumps]}))


def cmd_report(args):
    d = Path(args.result)
    try:
        files = io.read_tct_csv(_read(d / "tct.csv"))
    except (KeyError, ValueError) as exc:
        raise CliError(EXIT_INPUT, "parse", f"{d / 'tct.csv'}: {exc}") from None
    print(json.dumps(analysis.cancellation_report(files), indent=2, sort_keys=True))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_INPUT, "usage", f"{self.prog}: {message}")


def build_parser():
    p = _Parser(prog="cidmsim", description="CIDM digital timing simulator")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("validate", help="structural and compatibility checks")
    s.add_argument("--netlist", required=True)
    s.set_defaults(fn=cmd_validate)

    s = sub.add_parser("simulate", help="run a simulation and export traces")
    s.add_argument("--netlist", required=True)
    s.add_argument("--stimulus")
    s.add_argument("--until", type=float, required=True)
    s.add_argument("--out", help="output directory (default: $CIDMSIM_OUT or ./cidmsim-out)")
    s.add_argument("--format", default="csv", help="csv, vcd or csv,vcd")
    s.add_argument("--timescale", default="1fs")
    s.add_argument("--interconnect", choices=("tct", "wst"), default="tct")
    s.add_argument("--trace-events", action="store_true")
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("compare", help="deviation areas of model variants against references")
    s.add_argument("--netlist-base", required=True)
    s.add_argument("--models", default="cidm,idm,inertial")
    s.add_argument("--stimulus")
    s.add_argument("--reference", action="append", required=True, help="[SIGNAL=]PATH, repeatable")
    s.add_argument("--until", type=float, required=True)
    s.add_argument("--start", type=float, default=0.0)
    s.add_argument("--vth", type=float, default=0.5)
    s.add_argument("--vdd", type=float, default=1.0)
    s.add_argument("--out", help="CSV report path")
    s.set_defaults(fn=cmd_compare)

    s = sub.add_parser("gen-stimulus", help="normally distributed pulse train")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--mu", type=float, required=True)
    s.add_argument("--sigma", type=float, required=True)
    s.add_argument("--gap-mu", type=float)
    s.add_argument("--gap-sigma", type=float)
    s.add_argument("--floor", type=float, default=0.01)
    s.add_argument("--start", type=float, default=0.0)
    s.add_argument("--initial", type=int, choices=(0, 1), default=0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--port", default="in")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_gen_stimulus)

    s = sub.add_parser("reconstruct", help="analog waveform from a TCT trace")
    s.add_argument("--trace", required=True, help="tct.csv from simulate")
    s.add_argument("--vertex", required=True)
    s.add_argument("--waveforms", required=True, help="TAU_RISE,TAU_FALL[,VDD]")
    s.add_argument("--vth", type=float, required=True)
    s.add_argument("--step", type=float, required=True)
    s.add_argument("--t0", type=float)
    s.add_argument("--t1", type=float)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_reconstruct)

    s = sub.add_parser("report-cancellations", help="canceled pulse report of a result directory")
    s.add_argument("--result", required=True)
    s.set_defaults(fn=cmd_report)
    return p


def _fail(code, kind, message):
    sys.stderr.write(json.dumps({"error": kind, "exit": code, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliError as exc:
        return _fail(exc.code, exc.kind, str(exc))
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        args.fn(args)
    except CliError as exc:
        return _fail(exc.code, exc.kind, str(exc))
    except CircuitError as exc:
        return _fail(EXIT_VALIDATION, "validation", str(exc))
    except (io.VcdError, SimulationError) as exc:
        return _fail(EXIT_RUNTIME, "runtime", str(exc))
    except (ValueError, io.FormatError) as exc:
        return _fail(EXIT_INPUT, "input", str(exc))
    except Exception as exc:  # noqa: BLE001 - last-resort contract
        return _fail(EXIT_RUNTIME, type(exc).__name__, str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
