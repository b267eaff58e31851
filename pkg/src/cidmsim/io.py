"""File formats: YAML netlists, CSV stimuli and references, CSV and VCD exports.

Netlist (``version: 1``)::

    version: 1
    inputs:
      - {id: a, init: 0}
    channels:
      - id: g1
        gate: nand          # id, not, and, or, nand, nor, xor, xnor
        arity: 2            # optional, defaults to len(inputs)
        inputs: [a, g2]     # drivers of inputs 1..arity
        init: 1
        kind: cidm          # cidm, idm, pure, inertial
        shift: {plus: 0.0, minus: 0.0}
        input_shifts: {2: {plus: 0.1, minus: 0.1}}
        delay: {family: exp-log, delta_min: 1.0, delta_inf: 4.0, tau: 2.0}
        thresholds: {vth_in: 0.5}
    outputs:
      - {id: y, driver: g1}
    observe: [y]

Stimulus CSV: header ``port,t,x,o``, one transition per row. A row with
``t = -inf`` gives the initial value; without it the initial value is the
complement of the first transition.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_EVEN
from pathlib import Path

import numpy as np
import yaml

from .analysis import AnalogTrace, cancellation_report
from .circuit import ChannelSpec, Circuit, DelaySpec, Edge, GateFunction, Vertex
from .engine import SimResult
from .signals import NEG_INF, PureShift, TctSignal, WstSignal, validate_tct

SCHEMA_VERSION = 1


class FormatError(ValueError):
    """Parse or semantic error in an input file.

    ``line``/``column`` are 1-based when known; ``vertex`` names the offending
    vertex for semantic errors.
    """

    def __init__(self, message, line=None, column=None, vertex=None):
        self.line, self.column, self.vertex = line, column, vertex
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        if vertex is not None:
            where += f"vertex {vertex!r}: "
        super().__init__(where + message)
        self.message = message


# -- netlists ---------------------------------------------------------------

def _marks(node, path=(), out=None):
    """Map key paths of a composed YAML tree to (line, column)."""
    out = {} if out is None else out
    out[path] = (node.start_mark.line + 1, node.start_mark.column + 1)
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = yaml.safe_load(yaml.serialize(k)) if not isinstance(k, yaml.ScalarNode) else k.value
            _marks(v, path + (str(key),), out)
            # errors about a field point at its key
            out[path + (str(key),)] = (k.start_mark.line + 1, k.start_mark.column + 1)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _marks(v, path + (i,), out)
    return out


class _Doc:
    def __init__(self, marks):
        self.marks = marks

    def err(self, msg, path, vertex=None):
        p = tuple(path)
        while p and p not in self.marks:
            p = p[:-1]
        line, col = self.marks.get(p, (None, None))
        return FormatError(msg, line, col, vertex)

    def mapping(self, obj, path, allowed, required=(), vertex=None):
        if not isinstance(obj, dict):
            raise self.err(f"expected a mapping at {'/'.join(map(str, path)) or 'top level'}", path, vertex)
        for k in obj:
            if str(k) not in allowed:
                raise self.err(f"unknown field {k!r}", tuple(path) + (str(k),), vertex)
        for k in required:
            if k not in obj:
                raise self.err(f"missing field {k!r}", path, vertex)
        return obj

    def number(self, v, path, vertex=None):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.err(f"expected a number, got {v!r}", path, vertex)
        return float(v)

    def bit(self, v, path, vertex=None):
        if v not in (0, 1) or isinstance(v, bool):
            raise self.err(f"expected 0 or 1, got {v!r}", path, vertex)
        return int(v)


def _shift(doc, obj, path, vid):
    doc.mapping(obj, path, {"plus", "minus"}, ("plus", "minus"), vid)
    return PureShift(doc.number(obj["plus"], path + ("plus",), vid),
                     doc.number(obj["minus"], path + ("minus",), vid))


def load_netlist(text: str) -> Circuit:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        m = getattr(exc, "problem_mark", None)
        raise FormatError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                          m.line + 1 if m else None, m.column + 1 if m else None) from None
    if node is None:
        raise FormatError("empty netlist")
    doc = _Doc(_marks(node))
    doc.mapping(data, (), {"version", "inputs", "channels", "outputs", "observe"}, ("version",))
    if data["version"] != SCHEMA_VERSION:
        raise doc.err(f"unsupported schema version {data['version']!r}", ("version",))

    vertices, edges, seen = [], [], set()

    def claim(vid, path):
        if not isinstance(vid, str) or not vid:
            raise doc.err(f"vertex id must be a non-empty string, got {vid!r}", path)
        if vid in seen:
            raise doc.err("duplicate vertex id", path, vid)
        seen.add(vid)

    for i, obj in enumerate(data.get("inputs") or []):
        p = ("inputs", i)
        doc.mapping(obj, p, {"id", "init"}, ("id",))
        claim(obj["id"], p + ("id",))
        vertices.append(Vertex.input(obj["id"], doc.bit(obj.get("init", 0), p + ("init",), obj["id"])))

    channel_fields = {"id", "gate", "arity", "inputs", "init", "kind", "shift", "input_shifts",
                      "delay", "thresholds"}
    for i, obj in enumerate(data.get("channels") or []):
        p = ("channels", i)
        doc.mapping(obj, p, channel_fields, ("id", "gate", "inputs", "delay"))
        vid = obj["id"]
        claim(vid, p + ("id",))
        srcs = obj["inputs"]
        if not isinstance(srcs, list) or not all(isinstance(s, str) for s in srcs):
            raise doc.err("inputs must be a list of vertex ids", p + ("inputs",), vid)
        arity = obj.get("arity", len(srcs))
        try:
            gate = GateFunction(str(obj["gate"]), int(arity))
        except ValueError as exc:
            raise doc.err(str(exc), p + ("gate",), vid) from None
        delay = obj["delay"]
        doc.mapping(delay, p + ("delay",), {"family"} | _all_delay_params(), ("family",), vid)
        params = {}
        for k, v in delay.items():
            if k == "family":
                continue
            if isinstance(v, list):
                params[k] = [doc.number(x, p + ("delay", k), vid) for x in v]
            else:
                params[k] = doc.number(v, p + ("delay", k), vid)
        try:
            dspec = DelaySpec.make(str(delay["family"]), **params)
        except ValueError as exc:
            raise doc.err(str(exc), p + ("delay",), vid) from None
        shift = _shift(doc, obj["shift"], p + ("shift",), vid) if "shift" in obj else PureShift()
        ishifts = []
        for k, v in (obj.get("input_shifts") or {}).items():
            if isinstance(k, bool) or not isinstance(k, int):
                raise doc.err(f"input index must be an integer, got {k!r}", p + ("input_shifts",), vid)
            ishifts.append((k, _shift(doc, v, p + ("input_shifts", str(k)), vid)))
        th = obj.get("thresholds") or {}
        doc.mapping(th, p + ("thresholds",), set(th), (), vid)
        thresholds = tuple(sorted((str(k), doc.number(v, p + ("thresholds", str(k)), vid)) for k, v in th.items()))
        try:
            spec = ChannelSpec(gate, dspec, doc.bit(obj.get("init", 0), p + ("init",), vid),
                               str(obj.get("kind", "cidm")), shift, tuple(ishifts), thresholds)
            # build the involution pair now so bad parameters surface here
            if spec.kind in ("cidm", "idm"):
                spec.base
        except ValueError as exc:
            raise doc.err(str(exc), p, vid) from None
        vertices.append(Vertex.make_channel(vid, spec))
        edges.extend(Edge(s, n + 1, vid) for n, s in enumerate(srcs))

    for i, obj in enumerate(data.get("outputs") or []):
        p = ("outputs", i)
        doc.mapping(obj, p, {"id", "driver"}, ("id", "driver"))
        claim(obj["id"], p + ("id",))
        vertices.append(Vertex.output(obj["id"]))
        edges.append(Edge(obj["driver"], 1, obj["id"]))

    observe = data.get("observe")
    if observe is None:
        observe = [v.id for v in vertices if v.role == "output"]
    if not isinstance(observe, list):
        raise doc.err("observe must be a list of vertex ids", ("observe",))
    for i, o in enumerate(observe):
        if o not in seen:
            raise doc.err("observed signal is not a vertex", ("observe", i), o)
    for e in edges:
        if e.source not in seen:
            raise FormatError(f"unknown driver {e.source!r}", vertex=e.target)
    return Circuit(tuple(vertices), tuple(edges), tuple(observe))


def _all_delay_params():
    out = set()
    for req, opt in DelaySpec.FAMILY_PARAMS.values():
        out |= req | opt
    return out


def _num(v):
    if isinstance(v, tuple):
        return [_num(x) for x in v]
    return int(v) if float(v).is_integer() and abs(v) < 2**53 else float(v)


def netlist_dict(c: Circuit) -> dict:
    d = {"version": SCHEMA_VERSION}
    d["inputs"] = [{"id": v.id, "init": v.init} for v in c.inputs]
    chans = []
    for v in c.channels:
        s = v.channel
        ch = {"id": v.id, "gate": s.gate.kind}
        ch["arity"] = s.gate.arity
        ch["inputs"] = [e.source for e in c.incoming[v.id]]
        ch["init"] = s.init
        ch["kind"] = s.kind
        if not s.shift.is_zero:
            ch["shift"] = {"plus": s.shift.delta_plus, "minus": s.shift.delta_minus}
        if s.input_shifts:
            ch["input_shifts"] = {k: {"plus": sh.delta_plus, "minus": sh.delta_minus} for k, sh in s.input_shifts}
        ch["delay"] = {"family": s.delay.family, **{k: _num(p) for k, p in s.delay.params}}
        if s.thresholds:
            ch["thresholds"] = dict(s.thresholds)
        chans.append(ch)
    d["channels"] = chans
    d["outputs"] = [{"id": v.id, "driver": c.driver(v.id)} for v in c.outputs]
    d["observe"] = list(c.observe)
    return d


def save_netlist(c: Circuit) -> str:
    return yaml.safe_dump(netlist_dict(c), sort_keys=False, default_flow_style=None, width=100)


# -- stimuli and references -------------------------------------------------

def load_stimulus(text: str) -> dict[str, TctSignal]:
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows or [h.strip() for h in rows[0]] != ["port", "t", "x", "o"]:
        raise FormatError("stimulus header must be 'port,t,x,o'", 1)
    per_port: dict[str, list] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise FormatError(f"expected 4 fields, got {len(row)}", lineno)
        port = row[0].strip()
        try:
            t, x, o = float(row[1]), int(row[2]), float(row[3])
        except ValueError as exc:
            raise FormatError(str(exc), lineno) from None
        per_port.setdefault(port, []).append((lineno, (t, x, o)))
    out = {}
    for port, entries in per_port.items():
        lines = [ln for ln, _ in entries]
        trs = [tr for _, tr in entries]
        if trs[0][0] != NEG_INF:
            x0 = 1 - trs[0][1] if trs[0][1] in (0, 1) else 0
            trs.insert(0, (NEG_INF, x0, 0.0))
            lines.insert(0, lines[0])
        v = validate_tct(trs)
        if v is not None:
            raise FormatError(f"port {port!r}: {v}", lines[v.index])
        out[port] = TctSignal(tuple(trs))
    return out


def save_stimulus(stimuli: dict[str, TctSignal]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["port", "t", "x", "o"])
    for port in sorted(stimuli):
        for t, x, o in stimuli[port].transitions:
            w.writerow([port, repr(t), x, repr(o)])
    return buf.getvalue()


def load_reference_csv(text: str, vdd: float = 1.0) -> AnalogTrace:
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows or [h.strip() for h in rows[0]] != ["time", "voltage"]:
        raise FormatError("reference header must be 'time,voltage'", 1)
    ts, vs = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise FormatError(f"expected 2 fields, got {len(row)}", lineno)
        try:
            t, v = float(row[0]), float(row[1])
        except ValueError as exc:
            raise FormatError(str(exc), lineno) from None
        if not (math.isfinite(t) and math.isfinite(v)):
            raise FormatError("non-finite value", lineno)
        if ts and not t > ts[-1]:
            raise FormatError(f"time {t!r} does not exceed previous {ts[-1]!r}", lineno)
        ts.append(t)
        vs.append(v)
    try:
        return AnalogTrace(np.array(ts), np.array(vs), vdd)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def save_reference_csv(a: AnalogTrace) -> str:
    lines = ["time,voltage"]
    lines += [f"{t!r},{v!r}" for t, v in zip(a.times.tolist(), a.volts.tolist())]
    return "\n".join(lines) + "\n"


# -- result export ----------------------------------------------------------

def tct_csv(result: SimResult) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["vertex", "index", "t", "x", "o", "t_occ"])
    # output ports alias their driver's file and are left out
    for vid in sorted(result.file_owners()):
        for n, (t, x, o) in enumerate(result.files[vid].transitions):
            w.writerow([vid, n, repr(t), x, repr(o), repr(t + o)])
    return buf.getvalue()


def wst_csv(result: SimResult) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["vertex", "index", "t", "x"])
    for vid in sorted(result.wst):
        for n, (t, x) in enumerate(result.wst[vid].transitions):
            w.writerow([vid, n, repr(t), x])
    return buf.getvalue()


def read_tct_csv(text: str) -> dict[str, TctSignal]:
    per = {}
    for row in csv.DictReader(_io.StringIO(text)):
        per.setdefault(row["vertex"], []).append((float(row["t"]), int(row["x"]), float(row["o"])))
    return {k: TctSignal(tuple(v)) for k, v in per.items()}


def read_wst_csv(text: str) -> dict[str, WstSignal]:
    per = {}
    for row in csv.DictReader(_io.StringIO(text)):
        per.setdefault(row["vertex"], []).append((float(row["t"]), int(row["x"])))
    return {k: WstSignal(tuple(v)) for k, v in per.items()}


_UNITS = {"s": Decimal(1), "ms": Decimal("1e-3"), "us": Decimal("1e-6"), "ns": Decimal("1e-9"),
          "ps": Decimal("1e-12"), "fs": Decimal("1e-15")}
VCD_MAX_TICK = 2**63 - 1


class VcdError(ValueError):
    pass


def parse_timescale(ts: str) -> tuple[int, str, Decimal]:
    s = ts.replace(" ", "")
    for unit in sorted(_UNITS, key=len, reverse=True):
        if s.endswith(unit):
            mag = s[: -len(unit)] or "1"
            if mag in ("1", "10", "100"):
                return int(mag), unit, int(mag) * _UNITS[unit]
            break
    raise VcdError(f"bad timescale {ts!r}; expected 1, 10 or 100 followed by s, ms, us, ns, ps or fs")


def _vcd_ids(n):
    ids = []
    for i in range(n):
        s, k = "", i
        while True:
            s = chr(33 + k % 94) + s
            k = k // 94 - 1
            if k < 0:
                break
        ids.append(s)
    return ids


@dataclass
class VcdExport:
    text: str
    max_quantization_error: float  # in simulator time units
    collisions: list  # (signal, tick) where two transitions share a tick


def vcd_export(result: SimResult, signals=None, timescale: str = "1fs") -> VcdExport:
    """WST views of ``signals`` (default: all) as a VCD document.

    Times are rounded half-even to the timescale; the largest rounding error is
    reported. Negative times and ticks beyond 2**63-1 are rejected.
    """
    mag, unit, tick = parse_timescale(timescale)
    names = sorted(result.wst) if signals is None else list(signals)
    ids = _vcd_ids(len(names))
    changes = []
    max_err = 0.0
    collisions = []
    for name, ident in zip(names, ids):
        last_tick = None
        for t, x in result.wst[name].transitions[1:]:
            if t < 0:
                raise VcdError(f"{name}: transition at negative time {t!r} cannot be written to VCD")
            q = (Decimal(t) / tick).to_integral_value(ROUND_HALF_EVEN)
            if q > VCD_MAX_TICK:
                raise VcdError(f"{name}: time {t!r} overflows the {timescale} timescale; use a coarser one")
            q = int(q)
            max_err = max(max_err, abs(float(Decimal(q) * tick - Decimal(t))))
            if q == last_tick:
                collisions.append((name, q))
            last_tick = q
            changes.append((q, ident, x))
    changes.sort(key=lambda c: c[0])  # stable: per-signal order kept
    out = [
        "$version cidmsim $end",
        f"$timescale {mag} {unit} $end",
        "$scope module top $end",
    ]
    out += [f"$var wire 1 {i} {n} $end" for n, i in zip(names, ids)]
    out += ["$upscope $end", "$enddefinitions $end", "$dumpvars"]
    out += [f"{result.wst[n].initial}{i}" for n, i in zip(names, ids)]
    out.append("$end")
    cur = None
    for q, ident, x in changes:
        if q != cur:
            out.append(f"#{q}")
            cur = q
        out.append(f"{x}{ident}")
    return VcdExport("\n".join(out) + "\n", max_err, collisions)


def parse_vcd(text: str) -> dict:
    """Parse the VCD subset written by :func:`vcd_export` and check its grammar.

    Returns ``{"timescale": str, "signals": {name: [(tick, value), ...]}}``
    with the initial value at tick ``None``.
    """
    toks = text.split()
    i = 0
    ids, timescale = {}, None
    sig: dict[str, list] = {}

    def block(i):
        j = toks.index("$end", i)
        return toks[i + 1:j], j + 1

    while i < len(toks) and toks[i] != "$enddefinitions":
        tok = toks[i]
        if tok in ("$version", "$date", "$comment", "$scope", "$upscope"):
            _, i = block(i)
        elif tok == "$timescale":
            body, i = block(i)
            timescale = "".join(body)
            parse_timescale(timescale)
        elif tok == "$var":
            body, i = block(i)
            if len(body) != 4 or body[0] != "wire" or body[1] != "1":
                raise VcdError(f"unsupported var declaration {body}")
            ids[body[2]] = body[3]
            sig[body[3]] = []
        else:
            raise VcdError(f"unexpected token {tok!r} in header")
    if i >= len(toks):
        raise VcdError("missing $enddefinitions")
    if timescale is None:
        raise VcdError("missing $timescale")
    _, i = block(i)
    now = None
    in_dump = False
    while i < len(toks):
        tok = toks[i]
        i += 1
        if tok == "$dumpvars":
            in_dump = True
        elif tok == "$end":
            in_dump = False
        elif tok.startswith("#"):
            t = int(tok[1:])
            if now is not None and t < now:
                raise VcdError(f"time #{t} goes backwards from #{now}")
            now = t
        elif tok[0] in "01xz":
            ident = tok[1:]
            if ident not in ids:
                raise VcdError(f"unknown identifier {ident!r}")
            if tok[0] not in "01":
                raise VcdError(f"unsupported value {tok[0]!r}")
            sig[ids[ident]].append((None if in_dump else now, int(tok[0])))
        else:
            raise VcdError(f"unexpected token {tok!r}")
    return {"timescale": timescale, "signals": sig}


def events_csv(result: SimResult) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "event", "vertex", "index", "value"])
    for e in result.trace:
        v = e.value
        if isinstance(v, tuple):
            v = "|".join(repr(float(p)) if isinstance(p, float) else str(p) for p in v)
        w.writerow([repr(e.t), e.kind, e.vertex, e.index, "" if v is None else v])
    return buf.getvalue()


def write_result(result: SimResult, out_dir, formats=("csv",), timescale: str = "1fs") -> list[Path]:
    """Write exports and the cancellation report into ``out_dir``."""
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, text):
        p = d / name
        p.write_text(text)
        written.append(p)

    if "csv" in formats:
        put("tct.csv", tct_csv(result))
        put("wst.csv", wst_csv(result))
    if "vcd" in formats:
        v = vcd_export(result, timescale=timescale)
        put("wst.vcd", v.text)
        put("vcd_quantization.json", json.dumps(
            {"timescale": timescale, "max_error": v.max_quantization_error,
             "collisions": [list(c) for c in v.collisions]}, indent=2) + "\n")
    put("cancellations.json", json.dumps(cancellation_report(result), indent=2, sort_keys=True) + "\n")
    if result.trace:
        put("events.csv", events_csv(result))
    return written


def default_out_dir(fallback="cidmsim-out") -> str:
    return os.environ.get("CIDMSIM_OUT", fallback)
