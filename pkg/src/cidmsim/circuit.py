"""Circuit graphs built from input ports, output ports and delay channels."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

from .delay import (
    CausalityError,
    DomainError,
    InvolutionPair,
    causality_check,
    ip_compose,
    make_exp_log_pair,
    make_exp_sym_pair,
    make_sampled_pair,
    solve_delta_min,
)
from .signals import ZERO_SHIFT, PureShift

GATE_KINDS = ("id", "not", "and", "or", "nand", "nor", "xor", "xnor")
CHANNEL_KINDS = ("cidm", "idm", "pure", "inertial")


@dataclass(frozen=True)
class GateFunction:
    kind: str
    arity: int = 1

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind in ("id", "not") and self.arity != 1:
            raise ValueError(f"{self.kind} gate must have arity 1, got {self.arity}")
        if self.arity < 1:
            raise ValueError("gate arity must be at least 1")

    @property
    def single_input(self) -> bool:
        return self.kind in ("id", "not")

    def __call__(self, *xs: int) -> int:
        k = self.kind
        if k == "id":
            return xs[0]
        if k == "not":
            return 1 - xs[0]
        if k in ("and", "nand"):
            y = int(all(xs))
        elif k in ("or", "nor"):
            y = int(any(xs))
        else:
            y = sum(xs) & 1
        return 1 - y if k in ("nand", "nor", "xnor") else y


@dataclass(frozen=True)
class DelaySpec:
    """Parameterization of a channel's delay behavior, as written in netlists.

    ``family`` is one of ``exp-log``, ``exp-sym``, ``sampled`` (involution
    pairs) or ``pure``/``inertial`` (constant delays).
    """

    family: str
    params: tuple[tuple[str, object], ...] = ()

    FAMILY_PARAMS = {
        "exp-log": ({"delta_min", "delta_inf", "tau"}, set()),
        "exp-sym": ({"delta_inf", "tau"}, set()),
        "sampled": ({"T", "delay"}, {"up_T", "up_delay"}),
        "pure": ({"delta"}, set()),
        "inertial": ({"delta"}, {"theta"}),
    }

    @classmethod
    def make(cls, family: str, **params) -> "DelaySpec":
        return cls(family, tuple(sorted((k, _freeze(v)) for k, v in params.items())))

    def __post_init__(self):
        if self.family not in self.FAMILY_PARAMS:
            raise ValueError(f"unknown delay family {self.family!r}")
        required, optional = self.FAMILY_PARAMS[self.family]
        keys = {k for k, _ in self.params}
        missing = required - keys
        if missing:
            raise ValueError(f"delay family {self.family!r} missing parameter(s) {sorted(missing)}")
        extra = keys - required - optional
        if extra:
            raise ValueError(f"delay family {self.family!r} has unknown parameter(s) {sorted(extra)}")

    def __getitem__(self, key):
        return dict(self.params)[key]

    def get(self, key, default=None):
        return dict(self.params).get(key, default)

    @cached_property
    def pair(self) -> InvolutionPair | None:
        p = dict(self.params)
        if self.family == "exp-log":
            return make_exp_log_pair(p["delta_min"], p["delta_inf"], p["tau"])
        if self.family == "exp-sym":
            return make_exp_sym_pair(p["delta_inf"], p["tau"])
        if self.family == "sampled":
            return make_sampled_pair(p["T"], p["delay"], p.get("up_T"), p.get("up_delay"))
        return None

    @property
    def settled_delay(self) -> float:
        """Average delay of a long-settled channel, used by constant-delay stand-ins."""
        if self.family in ("pure", "inertial"):
            return float(self["delta"])
        pair = self.pair
        return 0.5 * (pair.up.settled + pair.down.settled)


def _freeze(v):
    if isinstance(v, (list, tuple)):
        return tuple(float(x) for x in v)
    return float(v)


@dataclass(frozen=True)
class ChannelSpec:
    gate: GateFunction
    delay: DelaySpec
    init: int = 0
    kind: str = "cidm"
    shift: PureShift = ZERO_SHIFT
    # per-input overrides, keyed by 1-based input index
    input_shifts: tuple[tuple[int, PureShift], ...] = ()
    thresholds: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.init not in (0, 1):
            raise ValueError("init must be 0 or 1")
        if self.kind in ("cidm", "idm") and self.delay.family in ("pure", "inertial"):
            raise ValueError(f"{self.kind} channel needs an involution delay family, got {self.delay.family!r}")
        if self.kind in ("pure", "inertial") and self.delay.family != self.kind:
            raise ValueError(f"{self.kind} channel needs delay family {self.kind!r}")
        if self.kind == "pure" and not self.delay["delta"] > 0:
            raise ValueError("pure delay must be positive")
        if self.kind == "inertial":
            d, th = self.delay["delta"], self.delay.get("theta", self.delay["delta"])
            if not (d > 0 and 0 <= th <= d):
                raise ValueError(f"inertial channel needs delta > 0 and 0 <= theta <= delta, got {d}, {th}")
        object.__setattr__(self, "input_shifts", tuple(sorted(self.input_shifts)))

    @property
    def base(self) -> InvolutionPair | None:
        return self.delay.pair

    @property
    def uses_shift(self) -> bool:
        return self.kind == "cidm"

    def shift_for_input(self, index: int, fed_by_port: bool = False) -> PureShift:
        """Effective pure-delay shift applied to input ``index``.

        Inputs driven straight from an input port default to no shift, since
        the external signal is assumed discretized at the matching threshold.
        """
        if not self.uses_shift:
            return ZERO_SHIFT
        overrides = dict(self.input_shifts)
        if index in overrides:
            return overrides[index]
        return ZERO_SHIFT if fed_by_port else self.shift


def calc_delta(gate: GateFunction, x: int, shift: PureShift) -> float:
    """Shift applied to an input transition to value ``x``.

    The shifter's rising/falling values refer to the gate output direction,
    so an inverter shifts a rising input by ``delta_minus``.
    """
    dp, dm = shift.delta_plus, shift.delta_minus
    if gate.kind == "not":
        return dm if x == 1 else dp
    if gate.kind == "id":
        return dp if x == 1 else dm
    if dp != dm:
        raise AssertionError(f"{gate.kind} gate requires delta_plus == delta_minus, got {dp}, {dm}")
    return dp


def wire_shift(gate: GateFunction, shift: PureShift) -> PureShift:
    """The shift as seen by rising/falling transitions on the input wire."""
    if gate.kind == "not":
        return PureShift(shift.delta_minus, shift.delta_plus)
    return shift


@dataclass(frozen=True)
class Vertex:
    id: str
    role: str  # "input", "output" or "channel"
    init: int = 0
    channel: ChannelSpec | None = None

    def __post_init__(self):
        if self.role not in ("input", "output", "channel"):
            raise ValueError(f"unknown vertex role {self.role!r}")
        if (self.role == "channel") != (self.channel is not None):
            raise ValueError(f"vertex {self.id!r}: channel spec required exactly for channel vertices")
        if self.role == "channel":
            object.__setattr__(self, "init", self.channel.init)

    @classmethod
    def input(cls, id, init=0):
        return cls(id, "input", init)

    @classmethod
    def output(cls, id):
        return cls(id, "output")

    @classmethod
    def make_channel(cls, id, spec: ChannelSpec):
        return cls(id, "channel", spec.init, spec)


@dataclass(frozen=True, order=True)
class Edge:
    source: str
    index: int
    target: str


@dataclass(frozen=True)
class Circuit:
    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]
    observe: tuple[str, ...] = ()

    def __post_init__(self):
        vs = tuple(self.vertices)
        seen = set()
        for v in vs:
            if v.id in seen:
                raise ValueError(f"duplicate vertex id {v.id!r}")
            seen.add(v.id)
        object.__setattr__(self, "vertices", vs)
        object.__setattr__(self, "edges", tuple(sorted(self.edges, key=lambda e: (e.target, e.index, e.source))))
        object.__setattr__(self, "observe", tuple(self.observe))

    @cached_property
    def by_id(self) -> dict[str, Vertex]:
        return {v.id: v for v in self.vertices}

    def __getitem__(self, vid) -> Vertex:
        return self.by_id[vid]

    @property
    def channels(self) -> list[Vertex]:
        return [v for v in self.vertices if v.role == "channel"]

    @property
    def inputs(self) -> list[Vertex]:
        return [v for v in self.vertices if v.role == "input"]

    @property
    def outputs(self) -> list[Vertex]:
        return [v for v in self.vertices if v.role == "output"]

    @cached_property
    def incoming(self) -> dict[str, list[Edge]]:
        out = {v.id: [] for v in self.vertices}
        for e in self.edges:
            out.setdefault(e.target, []).append(e)
        for es in out.values():
            es.sort(key=lambda e: e.index)
        return out

    @cached_property
    def outgoing(self) -> dict[str, list[Edge]]:
        out = {v.id: [] for v in self.vertices}
        for e in self.edges:
            out.setdefault(e.source, []).append(e)
        for es in out.values():
            es.sort(key=lambda e: (e.target, e.index))
        return out

    def driver(self, vid: str) -> str:
        """Vertex whose signal an output port carries."""
        return self.incoming[vid][0].source

    def effective_shift(self, e: Edge) -> PureShift:
        spec = self[e.target].channel
        return spec.shift_for_input(e.index, self[e.source].role == "input")

    def replace_channels(self, fn) -> "Circuit":
        """New circuit with every channel spec replaced by ``fn(vertex_id, spec)``."""
        vs = tuple(
            Vertex.make_channel(v.id, fn(v.id, v.channel)) if v.role == "channel" else v
            for v in self.vertices
        )
        return Circuit(vs, self.edges, self.observe)


@dataclass(frozen=True)
class StructureViolation:
    rule: str
    vertex: str
    message: str

    def __str__(self):
        return f"{self.rule} at {self.vertex}: {self.message}"


def validate_structure(c: Circuit) -> list[StructureViolation]:
    """Degree and ordering rules; an empty list means the circuit is well formed."""
    out = []
    ids = c.by_id
    for e in c.edges:
        for end in (e.source, e.target):
            if end not in ids:
                out.append(StructureViolation("C2", end, f"edge {e} references unknown vertex"))
    for v in c.vertices:
        inc = [e for e in c.incoming.get(v.id, []) if e.source in ids]
        outg = [e for e in c.outgoing.get(v.id, []) if e.target in ids]
        if v.role == "input" and inc:
            out.append(StructureViolation("C3", v.id, f"input port has {len(inc)} incoming edge(s)"))
        elif v.role == "output":
            if len(inc) != 1:
                out.append(StructureViolation("C4", v.id, f"output port has {len(inc)} incoming edges, expected 1"))
            if outg:
                out.append(StructureViolation("C4", v.id, "output port has outgoing edges"))
        elif v.role == "channel":
            d = v.channel.gate.arity
            idx = sorted(e.index for e in inc)
            if idx != list(range(1, d + 1)):
                out.append(StructureViolation(
                    "C5", v.id, f"{d}-ary gate needs inputs 1..{d}, got indices {idx}"))
            spec = v.channel
            if spec.kind == "cidm" and not spec.gate.single_input:
                for e in inc:
                    s = c.effective_shift(e)
                    if s.delta_plus != s.delta_minus:
                        out.append(StructureViolation(
                            "C6", v.id, f"multi-input gate input {e.index} has delta_plus != delta_minus"))
            for k, _ in spec.input_shifts:
                if not 1 <= k <= d:
                    out.append(StructureViolation("C5", v.id, f"shift override for missing input {k}"))
    return out


@dataclass(frozen=True)
class EdgeReport:
    edge: Edge
    causal: bool
    up_margin: float
    down_margin: float
    message: str = ""


@dataclass(frozen=True)
class CompatibilityReport:
    edges: tuple[EdgeReport, ...]

    @property
    def ok(self) -> bool:
        return all(r.causal for r in self.edges)

    @property
    def failures(self) -> list[EdgeReport]:
        return [r for r in self.edges if not r.causal]


def logical_channel(c: Circuit, e: Edge):
    """Delay behavior between the driver of ``e`` and the gate it feeds.

    Returns ``(base, shift)``: the driver's involution pair (``None`` for a
    constant-delay driver) and the successor's shift in wire direction.
    """
    src, dst = c[e.source], c[e.target]
    shift = wire_shift(dst.channel.gate, c.effective_shift(e))
    return src.channel.base, shift


def _edge_causality(c: Circuit, e: Edge) -> EdgeReport:
    base, shift = logical_channel(c, e)
    src = c[e.source].channel
    if base is None:
        d = src.delay["delta"]
        up, down = d + shift.delta_plus, d + shift.delta_minus
        return EdgeReport(e, up > 0 and down > 0, up, down)
    try:
        r = causality_check(base, shift)
    except (CausalityError, DomainError) as exc:
        return EdgeReport(e, False, math.nan, math.nan, str(exc))
    return EdgeReport(e, r.causal, r.up_margin, r.down_margin)


def validate_compatibility(c: Circuit) -> CompatibilityReport:
    """Strict causality of every logical channel.

    Channel-to-channel edges check the driver's pair followed by the
    receiver's shift. Edges from input ports require the effective shift to be
    zero. Edges into output ports carry no logical channel.
    """
    reports = []
    for e in c.edges:
        if e.source not in c.by_id or e.target not in c.by_id:
            continue
        src, dst = c[e.source], c[e.target]
        if dst.role != "channel":
            continue
        if src.role == "input":
            s = c.effective_shift(e)
            ok = s.is_zero
            reports.append(EdgeReport(
                e, ok, s.delta_plus, s.delta_minus,
                "" if ok else "input-port-driven input must have zero shift"))
        elif src.role == "channel":
            reports.append(_edge_causality(c, e))
    return CompatibilityReport(tuple(reports))


def min_delta_of_circuit(c: Circuit) -> float:
    """Smallest fixed-point delay over all channel-to-channel logical channels;
    ``inf`` when there are none."""
    best = math.inf
    for e in c.edges:
        if c[e.source].role != "channel" or c[e.target].role != "channel":
            continue
        base, shift = logical_channel(c, e)
        if base is None:
            d = c[e.source].channel.delay["delta"]
            best = min(best, d + shift.delta_plus, d + shift.delta_minus)
            continue
        pair = ip_compose(base, shift)
        best = min(best, solve_delta_min(pair.up, pair.down, tol=pair.tol))
    return best


def chain(specs: Iterable[ChannelSpec], input_init: int = 0, names=None) -> Circuit:
    """Input port ``in`` -> channels ``c1 .. ck`` in series -> output port ``out``."""
    specs = list(specs)
    names = names or [f"c{i + 1}" for i in range(len(specs))]
    vs = [Vertex.input("in", input_init)]
    es = []
    prev = "in"
    for name, spec in zip(names, specs):
        vs.append(Vertex.make_channel(name, spec))
        es.append(Edge(prev, 1, name))
        prev = name
    vs.append(Vertex.output("out"))
    es.append(Edge(prev, 1, "out"))
    return Circuit(tuple(vs), tuple(es), ("out",))
