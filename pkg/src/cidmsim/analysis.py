"""Experiment harness: stimuli, digitization, deviation areas, reconstruction."""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .baselines import MODEL_VARIANTS
from .circuit import Circuit
from .delay import SwitchingWaveform
from .engine import SimResult, run_batch
from .signals import NEG_INF, TctSignal, WstSignal, cancel_pass

log = logging.getLogger(__name__)


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class AnalogTrace:
    times: np.ndarray
    volts: np.ndarray
    vdd: float = 1.0
    # (time, magnitude) of value jumps introduced by reconstruction
    jumps: tuple = ()

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.volts, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise AnalysisError("times and voltages must be 1-d arrays of equal length")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            k = int(np.argmin(np.diff(t) > 0)) + 1
            raise AnalysisError(f"sample times not strictly increasing at sample {k}")
        lo, hi = -0.1 * self.vdd, 1.1 * self.vdd
        bad = np.flatnonzero((v < lo) | (v > hi))
        if bad.size:
            raise AnalysisError(f"voltage {v[bad[0]]!r} at t={t[bad[0]]!r} outside [{lo}, {hi}]")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "volts", v)

    def __eq__(self, other):
        return (isinstance(other, AnalogTrace) and self.vdd == other.vdd
                and np.array_equal(self.times, other.times) and np.array_equal(self.volts, other.volts))


def digitize(a: AnalogTrace, vth: float) -> WstSignal:
    """Threshold crossings of ``a`` at ``vth``, linearly interpolated.

    A sample counts as high when strictly above ``vth``. Crossings that
    coincide in time (a sample sitting exactly on the threshold) cancel.
    """
    if len(a.times) < 2:
        raise AnalysisError("trace needs at least 2 samples")
    if not 0 < vth < a.vdd:
        raise AnalysisError(f"vth {vth!r} outside (0, {a.vdd!r})")
    t, v = a.times, a.volts
    high = v > vth
    out = [(NEG_INF, int(high[0]))]
    for i in np.flatnonzero(high[1:] != high[:-1]):
        t0, t1, v0, v1 = t[i], t[i + 1], v[i], v[i + 1]
        tc = t0 + (vth - v0) * (t1 - t0) / (v1 - v0)
        tc = min(max(tc, t0), t1)
        if len(out) > 1 and tc <= out[-1][0]:
            out.pop()
        else:
            out.append((float(tc), int(high[i + 1])))
    return WstSignal(tuple(out))


def _as_wst(s) -> WstSignal:
    if isinstance(s, TctSignal):
        return WstSignal(tuple((occ, x) for occ, x, _ in cancel_pass(s.transitions)[0]))
    return s


def deviation_area(model, reference, horizon) -> float:
    """Measure of the set of times in ``horizon`` where the two signals differ."""
    t0, t1 = horizon
    if not t0 < t1:
        raise AnalysisError("horizon must satisfy t0 < t1")
    a, b = _as_wst(model), _as_wst(reference)
    # merged sweep over both transition lists; xor of the two states
    events = sorted([(t, 0, x) for t, x in a.transitions[1:]] + [(t, 1, x) for t, x in b.transitions[1:]])
    state = [a.initial, b.initial]
    total = 0.0
    prev = t0
    for t, k, x in events:
        if t > t0:
            hi = min(t, t1)
            if state[0] != state[1]:
                total += hi - prev
            prev = hi
            if t >= t1:
                break
        state[k] = x
    if state[0] != state[1]:
        total += t1 - prev
    return total


@dataclass(frozen=True)
class PulseTrainSpec:
    count: int
    mu: float
    sigma: float
    gap_mu: float | None = None  # defaults to mu
    gap_sigma: float | None = None  # defaults to sigma
    seed: int = 0
    floor: float = 0.01  # truncation floor as a fraction of the mean
    start: float = 0.0
    initial: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if not self.mu > 0 or not self.sigma >= 0:
            raise ValueError("need mu > 0 and sigma >= 0")
        if self.gap_mu is not None and not self.gap_mu > 0:
            raise ValueError("gap_mu must be positive")
        if self.gap_sigma is not None and not self.gap_sigma >= 0:
            raise ValueError("gap_sigma must be >= 0")
        if not 0 < self.floor < 1:
            raise ValueError("floor must lie in (0, 1)")


def _draw(rng, mu, sigma, n, floor):
    if sigma == 0:
        return np.full(n, float(mu))
    return np.maximum(rng.normal(mu, sigma, n), floor * mu)


def generate_pulse_train(spec: PulseTrainSpec) -> TctSignal:
    """``count`` pulses with normally distributed widths and gaps, each gap
    preceding its pulse. All offsets are zero."""
    rng = np.random.default_rng(spec.seed)
    gmu = spec.mu if spec.gap_mu is None else spec.gap_mu
    gsig = spec.sigma if spec.gap_sigma is None else spec.gap_sigma
    widths = _draw(rng, spec.mu, spec.sigma, spec.count, spec.floor)
    gaps = _draw(rng, gmu, gsig, spec.count, spec.floor)
    trs = [(NEG_INF, spec.initial, 0.0)]
    t = spec.start
    x = spec.initial
    for g, w in zip(gaps, widths):
        t += float(g)
        x = 1 - x
        trs.append((t, x, 0.0))
        t += float(w)
        x = 1 - x
        trs.append((t, x, 0.0))
    return TctSignal(tuple(trs))


@dataclass
class ComparisonReport:
    absolute: dict[str, float]
    normalized: dict[str, float] | None
    per_signal: dict[str, dict[str, float]]
    baseline: str = "inertial"
    note: str = ""

    def rows(self):
        for m, a in self.absolute.items():
            yield m, a, (self.normalized or {}).get(m, math.nan)


def compare_models(variants: Mapping[str, Circuit], stimuli, references: Mapping[str, object],
                   horizon, *, baseline: str = "inertial", vth: float = 0.5, workers: int = 1,
                   interconnect: Mapping[str, str] | None = None) -> ComparisonReport:
    """Run every model variant and score its observed signals against the references.

    ``references`` maps observed signal names to digital signals or analog
    traces (digitized at ``vth``). Areas are summed over signals and divided by
    the ``baseline`` model's total.
    """
    if baseline not in variants:
        raise AnalysisError(f"baseline model {baseline!r} not among variants")
    refs = {k: digitize(r, vth) if isinstance(r, AnalogTrace) else _as_wst(r) for k, r in references.items()}
    interconnect = interconnect or {}
    per_signal, absolute = {}, {}
    for name, c in variants.items():
        missing = [o for o in c.observe if o not in refs]
        if missing:
            raise AnalysisError(f"no reference for observed signal(s) {missing}")
        res = run_batch(c, [stimuli], horizon[1], workers=workers,
                        interconnect=interconnect.get(name, "tct"))[0]
        areas = {o: deviation_area(res.wst[o], refs[o], horizon) for o in c.observe}
        per_signal[name] = areas
        absolute[name] = sum(areas.values())
    base = absolute[baseline]
    if base > 0:
        normalized = {m: a / base for m, a in absolute.items()}
        note = ""
    else:
        normalized = None
        note = f"baseline {baseline!r} has zero deviation area; normalization undefined"
    return ComparisonReport(absolute, normalized, per_signal, baseline, note)


def model_variants(c: Circuit, models=("cidm", "idm", "inertial")) -> dict[str, Circuit]:
    unknown = [m for m in models if m not in MODEL_VARIANTS]
    if unknown:
        raise AnalysisError(f"unknown model(s) {unknown}; choose from {sorted(MODEL_VARIANTS)}")
    return {m: MODEL_VARIANTS[m](c) for m in models}


def _segment(w: SwitchingWaveform, start: float):
    return lambda t: w.value(t - start)


def reconstruct_analog(f, waveforms, vth: float, step: float, t0=None, t1=None) -> AnalogTrace:
    """Analog waveform whose threshold crossings sit at the occurrence times of ``f``.

    ``waveforms`` is ``(rising, falling)``. Each transition starts the
    matching full-range waveform, placed so it crosses ``vth`` at the
    occurrence time. The switch from the previous waveform happens where the
    two intersect, which keeps the trace continuous; canceled pulses show up
    as bumps that never reach ``vth``. If no intersection exists after the
    previous switch, the trace jumps and the jump is logged.
    """
    rise, fall = waveforms
    vdd = rise.vdd
    if not 0 < vth < vdd:
        raise AnalysisError(f"vth {vth!r} outside (0, {vdd!r})")
    if not step > 0:
        raise AnalysisError("step must be positive")
    if isinstance(f, WstSignal):
        f = TctSignal.from_wst(f)
    trs = f.transitions
    occs = [tr.t + tr.o for tr in trs[1:]]
    span = 10 * max(rise.tau, fall.tau)
    if t0 is None:
        t0 = min(occs) - span if occs else 0.0
    if t1 is None:
        t1 = max(occs) + span if occs else 10 * step
    x0 = trs[0].x
    const = float(vdd * x0)
    starts = [NEG_INF]
    funcs = [lambda t, c=const: c]
    jumps = []
    for tr, occ in zip(trs[1:], occs):
        w = rise if tr.x == 1 else fall
        g = _segment(w, occ - w.inverse(vth))
        cur, sw = funcs[-1], starts[-1]
        sign = 1.0 if tr.x == 1 else -1.0
        h = lambda t: sign * (g(t) - cur(t))
        lo = sw if math.isfinite(sw) else occ - span
        if h(lo) >= 0:
            if math.isfinite(sw) and h(lo) > 1e-12 * vdd:
                jumps.append((lo, abs(g(lo) - cur(lo))))
                log.info("reconstruction jump of %.3g V at t=%r", jumps[-1][1], lo)
            tsw = lo
        else:
            hi = max(occ, lo) + span
            while h(hi) < 0:
                hi += span
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if mid in (lo, hi):
                    break
                if h(mid) >= 0:
                    hi = mid
                else:
                    lo = mid
            tsw = hi
        starts.append(tsw)
        funcs.append(g)
    n = int(math.floor((t1 - t0) / step + 1e-9)) + 1
    ts = t0 + step * np.arange(n)
    vs = np.empty(n)
    for i, t in enumerate(ts):
        k = bisect.bisect_right(starts, t) - 1
        vs[i] = funcs[max(k, 0)](t)
    return AnalogTrace(ts, vs, vdd, tuple(jumps))


def _trains(pairs):
    """Group canceled pairs into runs of back-to-back pairs in the same file."""
    trains = []
    for p in pairs:
        if trains and p.index == trains[-1][-1].index + 2:
            trains[-1].append(p)
        else:
            trains.append([p])
    return trains


def cancellation_report(result) -> dict:
    """Canceled pairs, train count and longest train per vertex.

    Accepts a :class:`SimResult` or a mapping of vertex ids to TCT files.
    Vertices without cancellations are omitted.
    """
    if isinstance(result, SimResult):
        canceled = {v: result.canceled[v] for v in result.file_owners()}
    else:
        canceled = {v: cancel_pass(f.transitions)[1] for v, f in result.items()}
    out = {}
    for vid, pairs in sorted(canceled.items()):
        if not pairs:
            continue
        trains = _trains(pairs)
        out[vid] = {
            "pairs": [
                {
                    "index": p.index,
                    "scheduled": [p.first.t, p.second.t],
                    "occurrence": [p.first.t + p.first.o, p.second.t + p.second.o],
                    "values": [p.first.x, p.second.x],
                }
                for p in pairs
            ],
            "trains": len(trains),
            "longest_train": max(len(t) for t in trains),
        }
    return out
