"""Three-inverter ring: simulate, print the settled period, export traces.

    python3 scripts/ring_oscillator.py --until 200 --out ring-out
"""

import argparse

from cidmsim.circuit import min_delta_of_circuit
from cidmsim.engine import run
from cidmsim.experiments import ring
from cidmsim.io import save_netlist, write_result


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--stages", type=int, default=3)
    ap.add_argument("--until", type=float, default=200.0)
    ap.add_argument("--out", default="ring-out")
    args = ap.parse_args(argv)

    c = ring(args.stages)
    r = run(c, {}, args.until)
    times = r.wst["osc"].times
    gaps = [b - a for a, b in zip(times, times[1:])]
    print(f"delta_min of the circuit: {min_delta_of_circuit(c):.6g}")
    print(f"{len(times)} output transitions, {r.event_count} events")
    if len(gaps) >= 2:
        print(f"last half periods: {gaps[-2]:.9g}, {gaps[-1]:.9g}; period {gaps[-2] + gaps[-1]:.9g}")
    paths = write_result(r, args.out, ("csv", "vcd"))
    (paths[0].parent / "ring.yaml").write_text(save_netlist(c))
    for p in paths:
        print(p)


if __name__ == "__main__":
    main()
