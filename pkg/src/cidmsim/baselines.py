"""Constant-delay reference models and circuit-level model swaps."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .circuit import ChannelSpec, Circuit, DelaySpec
from .signals import NEG_INF, ZERO_SHIFT, WstSignal


@dataclass(frozen=True)
class PureDelayParams:
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("pure delay must be positive")


@dataclass(frozen=True)
class InertialDelayParams:
    delta: float
    theta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("inertial delay must be positive")
        if not self.theta >= 0:
            raise ValueError("minimum pulse width must be >= 0")


def pure_transform(s: WstSignal, p: PureDelayParams) -> WstSignal:
    return WstSignal(((NEG_INF, s.initial),) + tuple((t + p.delta, x) for t, x in s.transitions[1:]))


def inertial_transform(s: WstSignal, p: InertialDelayParams) -> WstSignal:
    """Shift by ``delta``, then drop pulses narrower than ``theta`` until none remain.

    A single stack pass suffices: every pair it removes is the leftmost
    sub-``theta`` pulse of the sequence at that moment, so the result equals
    repeated leftmost removal.
    """
    out = [(NEG_INF, s.initial)]
    for t, x in s.transitions[1:]:
        t = t + p.delta
        if len(out) > 1 and t - out[-1][0] < p.theta:
            out.pop()
        else:
            out.append((t, x))
    return WstSignal(tuple(out))


def as_idm(c: Circuit) -> Circuit:
    """Plain involution channels: every shift dropped."""
    def swap(_, spec: ChannelSpec):
        if spec.kind not in ("cidm", "idm"):
            return spec
        return replace(spec, kind="idm", shift=ZERO_SHIFT, input_shifts=())
    return c.replace_channels(swap)


def as_pure(c: Circuit, delta=None) -> Circuit:
    """Pure-delay stand-ins; by default each channel keeps its settled delay."""
    def swap(_, spec: ChannelSpec):
        d = spec.delay.settled_delay if delta is None else delta
        return replace(spec, kind="pure", delay=DelaySpec.make("pure", delta=d),
                       shift=ZERO_SHIFT, input_shifts=())
    return c.replace_channels(swap)


def as_inertial(c: Circuit, delta=None, theta=None) -> Circuit:
    """Inertial stand-ins; ``theta`` defaults to the channel delay."""
    def swap(_, spec: ChannelSpec):
        d = spec.delay.settled_delay if delta is None else delta
        th = d if theta is None else min(theta, d)
        return replace(spec, kind="inertial", delay=DelaySpec.make("inertial", delta=d, theta=th),
                       shift=ZERO_SHIFT, input_shifts=())
    return c.replace_channels(swap)


MODEL_VARIANTS = {
    "cidm": lambda c: c,
    "idm": as_idm,
    "pure": as_pure,
    "inertial": as_inertial,
}
