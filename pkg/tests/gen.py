"""Random circuits and stimuli for property tests."""

import random

from cidmsim.circuit import (
    ChannelSpec,
    Circuit,
    DelaySpec,
    Edge,
    GateFunction,
    Vertex,
    validate_compatibility,
)
from cidmsim.signals import NEG_INF, PureShift, TctSignal

MULTI = ("and", "or", "nand", "nor", "xor", "xnor")


def q(x, step=0.25):
    """Round to a coarse grid so that equal-time events are common."""
    return round(x / step) * step


def random_delay(rng):
    dmin = q(rng.uniform(0.5, 2.0))
    dinf = dmin + q(rng.uniform(0.5, 3.0))
    tau = q(rng.uniform(0.25, 2.0)) or 0.25
    return DelaySpec.make("exp-log", delta_min=dmin, delta_inf=dinf, tau=tau)


def random_shift(rng, gate, dmin):
    a = q(rng.uniform(-0.3, 0.3) * dmin, 0.05)
    if gate in ("id", "not"):
        return PureShift(a, q(rng.uniform(-0.3, 0.3) * dmin, 0.05))
    return PureShift(a, a)


def random_circuit(rng: random.Random, max_inputs=3, max_channels=7, tries=50) -> Circuit:
    """A random compatible DAG of gates fed by 1..max_inputs ports."""
    for _ in range(tries):
        n_in = rng.randint(1, max_inputs)
        n_ch = rng.randint(1, max_channels)
        vs = [Vertex.input(f"i{k}", rng.randint(0, 1)) for k in range(n_in)]
        es = []
        drivers = [v.id for v in vs]
        fanout = {d: 0 for d in drivers}
        for k in range(n_ch):
            name = f"g{k}"
            kind = rng.choice(("id", "not") + MULTI)
            arity = 1 if kind in ("id", "not") else rng.randint(2, 3)
            d = random_delay(rng)
            spec = ChannelSpec(GateFunction(kind, arity), d, init=rng.randint(0, 1),
                               shift=random_shift(rng, kind, d["delta_min"]))
            vs.append(Vertex.make_channel(name, spec))
            for j in range(arity):
                src = rng.choice(drivers)
                es.append(Edge(src, j + 1, name))
                fanout[src] += 1
            drivers.append(name)
            fanout[name] = 0
        sinks = [d for d in drivers[n_in:] if fanout[d] == 0]
        for k, s in enumerate(sinks):
            vs.append(Vertex.output(f"o{k}"))
            es.append(Edge(s, 1, f"o{k}"))
        c = Circuit(tuple(vs), tuple(es), tuple(f"o{k}" for k in range(len(sinks))))
        if validate_compatibility(c).ok:
            return c
    raise RuntimeError("no compatible circuit found")


def random_stimuli(rng: random.Random, c: Circuit, n_max=8, horizon=20.0):
    """Quantized transition times; ports often switch at the same instants."""
    shared = sorted({q(rng.uniform(0, horizon)) for _ in range(n_max)})
    out = {}
    for v in c.inputs:
        times = sorted({t for t in shared if rng.random() < 0.6} | {q(rng.uniform(0, horizon)) for _ in range(rng.randint(0, 3))})
        trs = [(NEG_INF, v.init, 0.0)]
        x = v.init
        for t in times:
            x = 1 - x
            trs.append((t, x, 0.0))
        out[v.id] = TctSignal(tuple(trs))
    return out


def dyadic(x, bits=12):
    return round(x * 2**bits) / 2**bits


def with_zero_time_glitch(rng: random.Random, stim: TctSignal, horizon=20.0) -> TctSignal:
    """Insert a pulse that ends at the instant it occurs: transition to the
    opposite value scheduled at ``s - a`` with offset ``a``, and the return
    to the current value at ``s``."""
    trs = list(stim.transitions)
    bounds = [0.0] + [t for t, _, _ in trs[1:]] + [max(horizon, trs[-1][0]) + 5.0]
    k = rng.choice([j for j in range(len(bounds) - 1) if bounds[j + 1] > bounds[j]])
    lo, hi = bounds[k], bounds[k + 1]
    # dyadic values keep (s - a) + a == s exact
    s = dyadic(lo + (hi - lo) * rng.uniform(0.1, 0.9))
    a = dyadic((s - lo) * rng.uniform(0.1, 0.9))
    x = trs[k][1]
    glitch = [(s - a, 1 - x, a), (s, x, 0.0)]
    return TctSignal(tuple(trs[:k + 1] + glitch + trs[k + 1:]))
