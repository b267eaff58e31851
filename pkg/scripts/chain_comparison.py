"""Deviation areas of CIDM, IDM and inertial models of an inverter chain.

The golden reference is a fine-grained CIDM run of ``threshold_chain``: each
stage reads its input at its own threshold, which the reference captures as a
pure-delay shift. The models under test use a coarse sampled delay table
(``coarse_model``). The IDM variant drops all shifts, and the inertial one
keeps only the settled delays. For every (mu, sigma) setting and seed the
script writes one CSV row with absolute and normalized areas.

    python3 scripts/chain_comparison.py --out chain_comparison.csv
"""

import argparse
import csv
import sys
import time

from cidmsim.analysis import PulseTrainSpec, compare_models, generate_pulse_train
from cidmsim.baselines import as_idm, as_inertial
from cidmsim.engine import run
from cidmsim.experiments import coarse_model, threshold_chain

MODELS = ("cidm", "idm", "inertial")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=2500)
    ap.add_argument("--mu", type=float, nargs="+", default=[1.5, 3.0, 6.0])
    ap.add_argument("--sigma-frac", type=float, nargs="+", default=[0.2, 0.5],
                    help="sigma as a fraction of mu")
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)

    ref_c = threshold_chain()
    model = coarse_model(ref_c)
    variants = {"cidm": model, "idm": as_idm(model), "inertial": as_inertial(model)}

    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["mu", "sigma", "seed"] + [f"area_{m}" for m in MODELS] + [f"norm_{m}" for m in MODELS]
               + ["seconds"])
    for mu in args.mu:
        for frac in args.sigma_frac:
            for seed in range(args.seeds):
                t0 = time.perf_counter()
                stim = {"in": generate_pulse_train(PulseTrainSpec(args.count, mu, frac * mu, seed=seed))}
                horizon = (0.0, stim["in"].transitions[-1].t + 30.0)
                ref = run(ref_c, stim, horizon[1])
                rep = compare_models(variants, stim, {"out": ref.wst["out"]}, horizon)
                norm = rep.normalized or {}
                w.writerow([mu, frac * mu, seed] + [repr(rep.absolute[m]) for m in MODELS]
                           + [repr(norm.get(m, float("nan"))) for m in MODELS]
                           + [f"{time.perf_counter() - t0:.2f}"])
                fh.flush()
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
