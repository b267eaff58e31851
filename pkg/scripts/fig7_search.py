"""Search for a chain where a pulse is canceled mid-chain and regenerated later.

Chain: in -> c1 -> c2 -> c3 -> out, all buffers (id gates) with the same
exp-log base. c3 gets a shift with delta_minus well above delta_plus, which
stretches the canceled pulse c2 hands over back into one wide enough to
survive c3's own channel. Prints the
first parameter set meeting all conditions:

* c2's WST view has no transitions and its file holds a canceled pair;
* the output's WST view has a regenerated pulse (two transitions);
* with WST-only interconnect c3's gate input never moves, so the output
  has no transitions.

Among all hits the one with the largest margin wins; the margin is the
smaller of the regenerated output pulse width and the overlap of c2's
canceled pair.
"""

import itertools
import json

import numpy as np

from cidmsim.circuit import ChannelSpec, DelaySpec, GateFunction, chain
from cidmsim.circuit import validate_compatibility
from cidmsim.engine import run
from cidmsim.signals import NEG_INF, PureShift, TctSignal


def build(p):
    d = DelaySpec.make("exp-log", delta_min=p["delta_min"], delta_inf=p["delta_inf"], tau=p["tau"])
    specs = [
        ChannelSpec(GateFunction("id"), d),
        ChannelSpec(GateFunction("id"), d, shift=PureShift(p["c2_plus"], p["c2_minus"])),
        ChannelSpec(GateFunction("id"), d, shift=PureShift(p["c3_plus"], p["c3_minus"])),
    ]
    return chain(specs)


def stimulus(p):
    t0 = 10.0
    return {"in": TctSignal(((NEG_INF, 0, 0.0), (t0, 1, 0.0), (t0 + p["width"], 0, 0.0)))}


def check(p):
    c = build(p)
    if not validate_compatibility(c).ok:
        return None
    try:
        r = run(c, stimulus(p), 1e6)
        rw = run(c, stimulus(p), 1e6, interconnect="wst")
    except Exception:
        return None
    ok = (len(r.wst["c2"]) == 1 and len(r.canceled["c2"]) == 1
          and len(r.wst["c1"]) == 3 and len(r.wst["out"]) == 3 and len(rw.wst["out"]) == 1
          and len(rw.gate_inputs[("c3", 1)]) == 1)
    if not ok:
        return None
    pair = r.canceled["c2"][0]
    overlap = pair.first.occurrence - pair.second.occurrence
    regen = r.wst["out"].times[1] - r.wst["out"].times[0]
    return min(overlap, regen), r


def main():
    base = dict(delta_min=1.0, delta_inf=3.0, tau=1.0)
    hits = []
    for width, c2p, c2m, c3p, c3m in itertools.product(
            np.arange(0.5, 3.01, 0.25), [0.0, -0.25, 0.25], [0.0, -0.25, 0.25],
            np.arange(-1.5, 0.01, 0.25), np.arange(0.0, 2.51, 0.25)):
        p = dict(base, width=float(width), c2_plus=c2p, c2_minus=c2m,
                 c3_plus=round(float(c3p), 3), c3_minus=round(float(c3m), 3))
        res = check(p)
        if res is not None:
            hits.append((res[0], p, res[1]))
    print("hits", len(hits))
    if not hits:
        return
    margin, p, r = max(hits, key=lambda h: h[0])
    print("margin", margin)
    print(json.dumps(p))
    for v in ("c1", "c2", "c3"):
        print(v, r.files[v].transitions[1:])


if __name__ == "__main__":
    main()
