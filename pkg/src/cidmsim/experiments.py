"""Circuits and stimuli used by the experiment scripts and acceptance tests."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .circuit import ChannelSpec, Circuit, DelaySpec, Edge, GateFunction, Vertex, chain, wire_shift
from .delay import SwitchingWaveform, derive_shift
from .signals import NEG_INF, PureShift, TctSignal

# Parameters of the cancel-then-regenerate chain, found by scripts/fig7_search.py
FIG7 = {
    "delta_min": 1.0, "delta_inf": 3.0, "tau": 1.0, "width": 3.0,
    "c2_plus": 0.25, "c2_minus": -0.25, "c3_plus": -1.0, "c3_minus": 2.25,
}


def fig7_chain(p=FIG7) -> tuple[Circuit, dict]:
    """Three buffers; c2 cancels the input pulse, c3's shift regenerates it."""
    d = DelaySpec.make("exp-log", delta_min=p["delta_min"], delta_inf=p["delta_inf"], tau=p["tau"])
    specs = [
        ChannelSpec(GateFunction("id"), d),
        ChannelSpec(GateFunction("id"), d, shift=PureShift(p["c2_plus"], p["c2_minus"])),
        ChannelSpec(GateFunction("id"), d, shift=PureShift(p["c3_plus"], p["c3_minus"])),
    ]
    t0 = 10.0
    stim = {"in": TctSignal(((NEG_INF, 0, 0.0), (t0, 1, 0.0), (t0 + p["width"], 0, 0.0)))}
    return chain(specs), stim


def threshold_chain(n=7, delta_min=1.0, delta_inf=2.5, tau=0.6, spread=0.1,
                    wave_tau=0.5, vth_low=0.35, vth_high=0.65) -> Circuit:
    """Inverter chain whose stages discretize their inputs at alternating
    thresholds; stage ``j`` scales the base delays by ``1 + spread * u_j``
    with a fixed pattern so the stages are not identical."""
    rise = SwitchingWaveform(True, wave_tau)
    fall = SwitchingWaveform(False, wave_tau)
    pattern = np.sin(np.arange(n) * 1.7)
    not_gate = GateFunction("not")
    specs = []
    init = 0
    for j in range(n):
        k = 1.0 + spread * float(pattern[j])
        d = DelaySpec.make("exp-log", delta_min=delta_min * k, delta_inf=delta_inf * k, tau=tau * k)
        if j == 0:
            shift = PureShift()
        else:
            vth = vth_low if j % 2 else vth_high
            shift = wire_shift(not_gate, derive_shift(rise, fall, 0.5, vth))
        init = 1 - init
        specs.append(ChannelSpec(not_gate, d, init=init, shift=shift))
    return chain(specs)


def coarse_model(c: Circuit, samples=8, lo_frac=0.9, hi_frac=3.0) -> Circuit:
    """Replace exp-log channels by sampled tables of their falling delay.

    Samples span ``[-lo_frac * delta_inf, hi_frac * delta_inf]`` on a
    geometric-ish grid denser near the lower end where the curve bends most.
    """
    def swap(_, spec: ChannelSpec):
        if spec.delay.family != "exp-log":
            return spec
        down = spec.base.down
        dinf = spec.delay["delta_inf"]
        u = np.linspace(0.0, 1.0, samples) ** 2
        ts = -lo_frac * dinf + u * (lo_frac + hi_frac) * dinf
        ds = [down(float(t)) for t in ts]
        return replace(spec, delay=DelaySpec.make("sampled", T=list(map(float, ts)), delay=ds))
    return c.replace_channels(swap)


def ring(n=3, delta_min=1.0, delta_inf=2.0, tau=0.5) -> Circuit:
    """``n`` inverters in a loop with no inputs; the reset makes it oscillate."""
    d = DelaySpec.make("exp-log", delta_min=delta_min, delta_inf=delta_inf, tau=tau)
    names = [f"r{i + 1}" for i in range(n)]
    vs = []
    for i, name in enumerate(names):
        vs.append(Vertex.make_channel(name, ChannelSpec(GateFunction("not"), d, init=i % 2)))
    es = [Edge(names[i - 1], 1, names[i]) for i in range(n)]
    vs.append(Vertex.output("osc"))
    es.append(Edge(names[-1], 1, "osc"))
    return Circuit(tuple(vs), tuple(es), ("osc",))
