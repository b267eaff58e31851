"""Discrete-event simulation of circuits built from CIDM channels.

Every channel and input port owns a transition file holding its TCT output.
Three event kinds drive the simulation:

``TI(C, I)``
    transition indicator: the file feeding input ``I`` of ``C`` got a new
    entry. Reads it, applies the input's pure-delay shift and schedules ``GI``.
``GI(C, I)``
    the gate input ``I`` of ``C`` changes. Re-evaluates the gate and schedules
    (or withdraws) ``GO`` at the same instant.
``GO(C)``
    the gate output of ``C`` changes. Appends a TCT transition whose offset
    comes from the channel's delay functions and fans ``TI`` out to every
    successor at the same instant.

Same-time events dispatch in the order TI, GI, GO, then by vertex id and
input index. Scheduling an event removes every pending instance of the same
event at the same or a later time, which is what makes canceled transitions
disappear from gate inputs.
"""

from __future__ import annotations

import heapq
import logging
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

from .circuit import (
    Circuit,
    calc_delta,
    min_delta_of_circuit,
    validate_compatibility,
    validate_structure,
)
from .delay import DomainError, pi_compose
from .signals import (
    NEG_INF,
    CanceledPair,
    SignalError,
    TctSignal,
    TctTransition,
    WstSignal,
    cancel_pass,
)

log = logging.getLogger(__name__)

TI, GI, GO = 0, 1, 2
KIND_NAMES = {TI: "evTI", GI: "evGI", GO: "evGO"}


class CircuitError(ValueError):
    """The circuit failed structural or compatibility validation."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class SimulationError(RuntimeError):
    pass


class TraceEntry(NamedTuple):
    t: float
    kind: str
    vertex: str
    index: int
    value: object


class EventQueue:
    """Priority queue of ``(time, kind, vertex, index)`` events with preemption."""

    def __init__(self):
        self._heap = []
        self._pending = {}
        self._seq = 0
        self.now = NEG_INF

    def __len__(self):
        return sum(len(v) for v in self._pending.values())

    def schedule(self, kind, vertex, index, t, value=None):
        """Schedule an event; returns it with the pending instances it preempted."""
        if t < self.now:
            raise SimulationError(
                f"{KIND_NAMES[kind]}({vertex}, {index}) scheduled at {t!r} before now={self.now!r}")
        key = (kind, vertex, index)
        preempted = self.cancel(key, t)
        return self._push(t, kind, vertex, index, value), preempted

    def _push(self, t, kind, vertex, index, value):
        self._seq += 1
        entry = [t, kind, vertex, index, self._seq, value, True]
        heapq.heappush(self._heap, entry)
        self._pending.setdefault((kind, vertex, index), []).append(entry)
        return entry

    def cancel(self, key, t) -> list:
        """Withdraw pending instances of ``key`` at time ``t`` or later."""
        entries = self._pending.get(key)
        if not entries:
            return []
        keep, gone = [], []
        for e in entries:
            if e[0] >= t:
                e[6] = False
                gone.append(e)
            else:
                keep.append(e)
        if keep:
            self._pending[key] = keep
        else:
            del self._pending[key]
        return gone

    def withdraw(self, entry) -> bool:
        """Drop one pending entry; False if it was already dispatched or dropped."""
        key = (entry[1], entry[2], entry[3])
        entries = self._pending.get(key, [])
        for k, e in enumerate(entries):
            if e is entry:
                e[6] = False
                del entries[k]
                if not entries:
                    del self._pending[key]
                return True
        return False

    def revive(self, entries):
        for e in entries:
            self._push(e[0], e[1], e[2], e[3], e[5])

    def peek_time(self):
        self._drop_dead()
        return self._heap[0][0] if self._heap else None

    def pop(self):
        self._drop_dead()
        e = heapq.heappop(self._heap)
        key = (e[1], e[2], e[3])
        entries = self._pending[key]
        entries.remove(e)
        if not entries:
            del self._pending[key]
        self.now = e[0]
        return e

    def _drop_dead(self):
        h = self._heap
        while h and not h[0][6]:
            heapq.heappop(h)


@dataclass
class SimResult:
    files: dict[str, TctSignal]
    wst: dict[str, WstSignal]
    canceled: dict[str, list[CanceledPair]]
    gate_inputs: dict[tuple[str, int], WstSignal]
    gate_outputs: dict[str, WstSignal]
    event_count: int
    events_by_kind: dict[str, int]
    end_time: float
    trace: list[TraceEntry] = field(default_factory=list)
    # output port -> driving vertex
    aliases: dict[str, str] = field(default_factory=dict)

    def signal(self, vid: str) -> WstSignal:
        return self.wst[vid]

    def file_owners(self) -> list[str]:
        """Vertices owning a transition file (input ports and channels)."""
        return [v for v in self.files if v not in self.aliases]


class _Channel:
    __slots__ = ("id", "gate", "kind", "init", "pi", "base", "dp", "dm", "delta", "theta",
                 "sources", "shifts", "fanout")


def _prepare(c: Circuit):
    chans = {}
    for v in c.channels:
        spec = v.channel
        ch = _Channel()
        ch.id = v.id
        ch.gate = spec.gate
        ch.kind = spec.kind
        ch.init = spec.init
        ch.base = spec.base
        ch.pi = pi_compose(spec.shift, spec.base) if spec.kind == "cidm" else None
        ch.dp, ch.dm = spec.shift.delta_plus, spec.shift.delta_minus
        if spec.kind in ("pure", "inertial"):
            ch.delta = spec.delay["delta"]
            ch.theta = spec.delay.get("theta", ch.delta)
        else:
            ch.delta = ch.theta = None
        inc = c.incoming[v.id]
        ch.sources = [e.source for e in inc]
        ch.shifts = [c.effective_shift(e) for e in inc]
        chans[v.id] = ch
    fanout = {}
    for v in c.vertices:
        fanout[v.id] = [(e.target, e.index) for e in c.outgoing[v.id] if c[e.target].role == "channel"]
    return chans, fanout


def check_circuit(c: Circuit):
    violations = validate_structure(c)
    if violations:
        raise CircuitError("structural validation failed: " + "; ".join(map(str, violations)), violations)
    rep = validate_compatibility(c)
    if not rep.ok:
        msg = "; ".join(
            f"{r.edge.source}->{r.edge.target}[{r.edge.index}] margins ({r.up_margin:.6g}, {r.down_margin:.6g})"
            + (f" {r.message}" if r.message else "")
            for r in rep.failures
        )
        raise CircuitError("incompatible channels: " + msg, rep.failures)


def _normalize_stimuli(c: Circuit, stimuli: Mapping[str, TctSignal] | None):
    stimuli = dict(stimuli or {})
    ports = {v.id: v for v in c.inputs}
    unknown = set(stimuli) - set(ports)
    if unknown:
        raise ValueError(f"stimulus for unknown input port(s) {sorted(unknown)}")
    out = {}
    for pid, v in ports.items():
        s = stimuli.get(pid)
        if s is None:
            s = TctSignal.constant(v.init)
        elif not isinstance(s, TctSignal):
            s = TctSignal.from_wst(s) if isinstance(s, WstSignal) else TctSignal(tuple(s))
        if s.initial != v.init:
            raise ValueError(f"stimulus for {pid!r} starts at {s.initial}, port init is {v.init}")
        for tr in s.transitions[1:]:
            if tr.t < 0:
                raise ValueError(f"stimulus for {pid!r} has a transition scheduled at {tr.t!r} < 0")
        out[pid] = s
    return out


def run(c: Circuit, stimuli: Mapping[str, TctSignal] | None = None, tau: float = math.inf, *,
        interconnect: str = "tct", trace: bool = False, shuffle=None, validate: bool = True) -> SimResult:
    """Simulate ``c`` up to and including time ``tau``.

    ``interconnect="wst"`` removes canceled pulses at the driving channel's
    output before they reach successors, which is how a classic involution
    simulator sees the wires. ``shuffle`` (a seed or ``random.Random``)
    randomizes the insertion order of same-time events; the result must not
    depend on it.
    """
    if interconnect not in ("tct", "wst"):
        raise ValueError("interconnect must be 'tct' or 'wst'")
    if not tau >= 0:
        raise ValueError("tau must be >= 0")
    if validate:
        check_circuit(c)
    stim = _normalize_stimuli(c, stimuli)
    rng = None
    if shuffle is not None:
        rng = shuffle if isinstance(shuffle, random.Random) else random.Random(shuffle)

    def order(seq):
        seq = list(seq)
        if rng is not None:
            rng.shuffle(seq)
        return seq

    chans, fanout = _prepare(c)
    init = {v.id: v.init for v in c.vertices if v.role != "output"}
    files = {vid: [TctTransition(NEG_INF, x, 0.0)] for vid, x in init.items()}
    survivors = {vid: [(NEG_INF, x, 0)] for vid, x in init.items()}
    gi = {cid: [init[s] for s in ch.sources] for cid, ch in chans.items()}
    go = {cid: ch.init for cid, ch in chans.items()}
    gi_log = {(cid, i + 1): [(NEG_INF, x)] for cid, xs in gi.items() for i, x in enumerate(xs)}
    go_log = {cid: [(NEG_INF, x)] for cid, x in go.items()}
    pending_reads = {vid: set() for vid in init}
    counts = {TI: 0, GI: 0, GO: 0}
    tr_log = []
    q = EventQueue()

    # stimulus transitions are file writes of the input port, dispatched like GO
    for pid in order(stim):
        for n, tr in enumerate(stim[pid].transitions[1:], start=1):
            if tr.t <= tau:
                q.schedule(GO, pid, n, tr.t, tr)

    if tau >= 0:
        for cid in order(chans):
            ch = chans[cid]
            x = ch.gate(*gi[cid])
            if x != ch.init:
                q.schedule(GO, cid, 0, 0.0, x)

    undo = {vid: None for vid in init}

    def write(vid, t, x, o):
        if pending_reads[vid]:
            raise SimulationError(f"file of {vid} rewritten at t={t!r} before successors read it")
        f = files[vid]
        if not t > f[-1].t:
            raise SimulationError(f"{vid}: transition at t={t!r} does not follow {f[-1].t!r}")
        f.append(TctTransition(t, x, o))
        occ = t + o
        st = survivors[vid]
        if len(st) > 1 and occ <= st[-1][0]:
            undo[vid] = st.pop()
        else:
            st.append((occ, x, len(f) - 1))
            undo[vid] = None
        for target, idx in order(fanout[vid]):
            q.schedule(TI, target, idx, t)
            pending_reads[vid].add((target, idx))

    # per gate input: the last read's event, what it preempted, the input before
    reads = {}

    def read_input(vid, idx, t):
        ch = chans[vid]
        src = ch.sources[idx - 1]
        f = files[src]
        last = f[-1]
        shift = ch.shifts[idx - 1]
        x = last.x
        if interconnect == "wst" and survivors[src][-1][2] != len(f) - 1 and len(f) > 2:
            # last entry annihilated its predecessor: retract that one instead
            prev = f[-2]
            occ = prev.t + prev.o
            d = calc_delta(ch.gate, prev.x, shift)
        else:
            occ = last.t + last.o
            d = calc_delta(ch.gate, x, shift)
        entry, preempted = q.schedule(GI, vid, idx, max(t, occ + d), x)
        reads[(vid, idx)] = (entry, preempted, gi[vid][idx - 1])

    def retract(vid, t):
        # A second output change at the instant of the last write: only the
        # last scheduled instance counts, so the pair is a zero-width glitch
        # and the earlier entry is removed. Successors already read it (TI
        # precedes GO at equal time), so their reads are undone as well.
        f = files[vid]
        f.pop()
        st = survivors[vid]
        if undo[vid] is None:
            st.pop()
        else:
            st.append(undo[vid])
        undo[vid] = None
        go[vid] = f[-1].x
        go_log[vid].pop()
        for target, idx in order(fanout[vid]):
            entry, preempted, before = reads.pop((target, idx))
            if not q.withdraw(entry):
                # it already fired at t; put the input back
                q.schedule(GI, target, idx, t, before)
            q.revive(preempted)

    while True:
        t = q.peek_time()
        if t is None or t > tau:
            break
        t, kind, vid, idx, _, value, _ = q.pop()
        counts[kind] += 1
        if trace:
            tr_log.append(TraceEntry(t, KIND_NAMES[kind], vid, idx, value))
            log.debug("t=%r %s(%s,%s) %r", t, KIND_NAMES[kind], vid, idx, value)

        if kind == TI:
            pending_reads[chans[vid].sources[idx - 1]].discard((vid, idx))
            read_input(vid, idx, t)

        elif kind == GI:
            xs = gi[vid]
            if xs[idx - 1] == value:
                continue
            xs[idx - 1] = value
            glog = gi_log[(vid, idx)]
            if glog[-1][0] == t:
                glog.pop()
            else:
                glog.append((t, value))
            ch = chans[vid]
            y = ch.gate(*xs)
            if y != go[vid]:
                q.schedule(GO, vid, 0, t, y)
            else:
                q.cancel((GO, vid, 0), t)

        else:
            if vid not in chans:
                write(vid, value.t, value.x, value.o)
                continue
            ch = chans[vid]
            y = value
            if files[vid][-1].t == t:
                retract(vid, t)
                continue
            go[vid] = y
            go_log[vid].append((t, y))
            last = files[vid][-1]
            try:
                o = _offset(ch, t, y, last, survivors[vid])
            except DomainError as exc:
                raise SimulationError(
                    f"evGO({vid}) at t={t!r}, value {y}: {exc}; previous entry {tuple(last)}") from exc
            write(vid, t, y, o)

    return _postprocess(c, files, gi_log, go_log, counts, tau, tr_log)


def _offset(ch: _Channel, t, y, last, surv):
    if ch.kind == "cidm":
        T = t - (last.t + last.o)
        try:
            if y == 1:
                return ch.pi.up(T - ch.dp) - ch.dp
            return ch.pi.down(T - ch.dm) - ch.dm
        except DomainError:
            if not t > last.t:
                raise
            # T > -delta_inf holds exactly; only rounding put it on the edge.
            # The composed offset equals the base delay of T.
            f = ch.base.up if y == 1 else ch.base.down
            return f(max(T, math.nextafter(f.domain_min, math.inf)))
    if ch.kind == "idm":
        T = t - (last.t + last.o)
        return ch.base.up(T) if y == 1 else ch.base.down(T)
    if ch.kind == "pure":
        return ch.delta
    top_occ = surv[-1][0]
    if len(surv) > 1 and t + ch.delta - top_occ < ch.theta:
        # pulse narrower than theta: land on the previous output to cancel it
        return top_occ - t
    return ch.delta


def _postprocess(c, files, gi_log, go_log, counts, tau, tr_log) -> SimResult:
    out_files, wst, canceled = {}, {}, {}
    try:
        for vid, f in files.items():
            s = TctSignal(tuple(f))
            out_files[vid] = s
            surv, pairs = cancel_pass(s.transitions)
            wst[vid] = WstSignal(tuple((occ, x) for occ, x, _ in surv))
            canceled[vid] = pairs
        for v in c.outputs:
            d = c.driver(v.id)
            out_files[v.id] = out_files[d]
            wst[v.id] = wst[d]
            canceled[v.id] = []
        gate_inputs = {k: WstSignal(tuple(v)) for k, v in gi_log.items()}
        gate_outputs = {k: WstSignal(tuple(v)) for k, v in go_log.items()}
    except SignalError as exc:
        raise SimulationError(f"simulation produced an invalid signal: {exc}") from exc
    return SimResult(
        files=out_files,
        wst=wst,
        canceled=canceled,
        gate_inputs=gate_inputs,
        gate_outputs=gate_outputs,
        event_count=sum(counts.values()),
        events_by_kind={KIND_NAMES[k]: n for k, n in counts.items()},
        end_time=tau,
        trace=tr_log,
        aliases={v.id: c.driver(v.id) for v in c.outputs},
    )


def event_bound(c: Circuit, stimuli: Mapping[str, TctSignal] | None, tau: float, factor: int = 4) -> float:
    """Upper bound on dispatched events for a compatible circuit.

    Each channel can switch at most once per smallest logical-channel fixed
    point, plus once per externally supplied transition and once at reset.
    Every gate-output change costs one GO plus a TI and a GI per fan-out edge.
    """
    dmin = min_delta_of_circuit(c)
    n_stim = sum(len(s) - 1 for s in (stimuli or {}).values())
    per_channel = 1 + n_stim + (math.ceil(tau / dmin) if math.isfinite(dmin) else 0)
    cost = len(c.vertices) + 2 * len(c.edges)
    return factor * per_channel * cost + 2 * n_stim


def _run_one(args):
    c, stim, tau, kw = args
    return run(c, stim, tau, **kw)


def run_batch(c: Circuit, stimuli_list: Sequence[Mapping[str, TctSignal]], tau: float,
              workers: int = 1, **kw) -> list[SimResult]:
    """Independent runs of ``c`` for each stimulus set, in input order."""
    jobs = [(c, s, tau, kw) for s in stimuli_list]
    if workers <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_one, jobs))
