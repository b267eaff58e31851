"""Digital signal encodings.

Two encodings are used throughout the simulator:

* WST (well-separated transitions): alternating ``(t, x)`` pairs with strictly
  increasing times. This is what a classic digital simulator emits.
* TCT (threshold-crossing times): ``(t, x, o)`` triples where ``t`` is the time
  a transition was scheduled and ``t + o`` the time it crosses the threshold.
  Occurrence times may run backwards; a transition whose occurrence does not
  exceed its predecessor's annihilates both.

Both carry an initial transition at ``-inf``. Times are plain floats and the
IEEE ``-inf`` value is the only way the initial instant is written.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

NEG_INF = float("-inf")


class SignalError(ValueError):
    """Raised when a transition list violates one of the signal properties."""

    def __init__(self, violation: "Violation"):
        super().__init__(str(violation))
        self.violation = violation


@dataclass(frozen=True)
class Violation:
    prop: str  # "S1" .. "S4" or "bit"
    index: int
    message: str

    def __str__(self):
        return f"{self.prop} violated at index {self.index}: {self.message}"


class WstTransition(NamedTuple):
    t: float
    x: int


class TctTransition(NamedTuple):
    t: float
    x: int
    o: float = 0.0

    @property
    def occurrence(self) -> float:
        return self.t + self.o


@dataclass(frozen=True)
class PureShift:
    """Constant delay added to rising (``delta_plus``) and falling
    (``delta_minus``) transitions. Either value may be negative."""

    delta_plus: float = 0.0
    delta_minus: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.delta_plus) and math.isfinite(self.delta_minus)):
            raise ValueError("shift values must be finite")

    def for_value(self, x: int) -> float:
        return self.delta_plus if x == 1 else self.delta_minus

    @property
    def is_zero(self) -> bool:
        return self.delta_plus == 0.0 and self.delta_minus == 0.0


ZERO_SHIFT = PureShift()


def _check_common(pairs: Sequence[tuple[float, int]]) -> Violation | None:
    if not pairs:
        return Violation("S1", 0, "signal has no initial transition")
    for n, (t, x) in enumerate(pairs):
        if x not in (0, 1):
            return Violation("bit", n, f"value {x!r} is not 0 or 1")
    if pairs[0][0] != NEG_INF:
        return Violation("S1", 0, f"initial transition at {pairs[0][0]!r}, expected -inf")
    for n in range(1, len(pairs)):
        t, x = pairs[n]
        if math.isnan(t) or math.isinf(t):
            return Violation("S3", n, f"time {t!r} is not finite")
        if x == pairs[n - 1][1]:
            return Violation("S2", n, f"value {x} repeats previous value")
        if not t > pairs[n - 1][0]:
            return Violation("S3", n, f"time {t!r} does not exceed previous {pairs[n - 1][0]!r}")
    return None


def validate_wst(transitions: Iterable) -> Violation | None:
    """Check S1-S3. Returns ``None`` when the list is a valid WST signal.

    Signals are finite lists, so the unbounded-growth part of S3 holds
    trivially.
    """
    pairs = [(float(tr[0]), tr[1]) for tr in transitions]
    return _check_common(pairs)


def validate_tct(transitions: Iterable) -> Violation | None:
    """Check S1-S4 on a list of ``(t, x, o)`` triples."""
    trs = [TctTransition(float(t), x, float(o)) for t, x, o in transitions]
    v = _check_common([(tr.t, tr.x) for tr in trs])
    if v is not None:
        return v
    if trs[0].o != 0.0:
        return Violation("S4", 0, f"initial offset {trs[0].o!r} is not 0")
    for n in range(1, len(trs)):
        if not math.isfinite(trs[n].o) and not (trs[n].o == NEG_INF):
            return Violation("S4", n, f"offset {trs[n].o!r} is not a time")
    for n in range(2, len(trs)):
        if trs[n].occurrence < trs[n - 2].occurrence:
            return Violation(
                "S4", n,
                f"occurrence {trs[n].occurrence!r} precedes occurrence "
                f"{trs[n - 2].occurrence!r} of transition {n - 2}",
            )
    return None


@dataclass(frozen=True)
class WstSignal:
    transitions: tuple[WstTransition, ...]

    def __post_init__(self):
        trs = tuple(WstTransition(float(t), int(x)) for t, x in self.transitions)
        object.__setattr__(self, "transitions", trs)
        v = _check_common(trs)
        if v is not None:
            raise SignalError(v)

    @classmethod
    def constant(cls, x: int) -> "WstSignal":
        return cls(((NEG_INF, x),))

    @classmethod
    def from_times(cls, initial: int, times: Iterable[float]) -> "WstSignal":
        """Alternating signal starting at ``initial`` that toggles at ``times``."""
        trs = [(NEG_INF, initial)]
        for t in times:
            trs.append((t, 1 - trs[-1][1]))
        return cls(tuple(trs))

    @property
    def initial(self) -> int:
        return self.transitions[0].x

    @property
    def times(self) -> list[float]:
        return [tr.t for tr in self.transitions[1:]]

    def __len__(self):
        return len(self.transitions)

    def __iter__(self):
        return iter(self.transitions)

    def state_at(self, t: float) -> int:
        return state_at(self, t)


@dataclass(frozen=True)
class TctSignal:
    transitions: tuple[TctTransition, ...]

    def __post_init__(self):
        trs = tuple(TctTransition(float(t), int(x), float(o)) for t, x, o in self.transitions)
        object.__setattr__(self, "transitions", trs)
        v = validate_tct(trs)
        if v is not None:
            raise SignalError(v)

    @classmethod
    def constant(cls, x: int) -> "TctSignal":
        return cls(((NEG_INF, x, 0.0),))

    @classmethod
    def from_wst(cls, s: WstSignal) -> "TctSignal":
        return cls(tuple((t, x, 0.0) for t, x in s.transitions))

    @property
    def initial(self) -> int:
        return self.transitions[0].x

    def __len__(self):
        return len(self.transitions)

    def __iter__(self):
        return iter(self.transitions)

    def state_at(self, t: float) -> int:
        return state_at(self, t)


@dataclass(frozen=True)
class CanceledPair:
    """Transition ``index`` annihilated by the later transition ``second``."""

    index: int
    first: TctTransition
    second: TctTransition


def cancel_pass(transitions: Sequence[TctTransition]):
    """Left-to-right cancellation over TCT transitions.

    Returns ``(survivors, canceled)`` where ``survivors`` are
    ``(occurrence, x, index)`` triples with strictly increasing occurrence and
    ``canceled`` lists the annihilated pairs. S4 guarantees only the
    immediately preceding survivor can ever be hit, so a stack suffices.
    """
    first = transitions[0]
    survivors = [(NEG_INF, first.x, 0)]
    canceled = []
    for n in range(1, len(transitions)):
        tr = transitions[n]
        occ = tr.occurrence
        top_occ, _, top_idx = survivors[-1]
        if len(survivors) > 1 and occ <= top_occ:
            # under S4 the survivor on top is always transition n - 1 here
            survivors.pop()
            canceled.append(CanceledPair(top_idx, transitions[top_idx], tr))
        else:
            survivors.append((occ, tr.x, n))
    return survivors, canceled


def tct_to_wst(s: TctSignal) -> WstSignal:
    """The WST signal with the same state function as ``s``."""
    survivors, _ = cancel_pass(s.transitions)
    return WstSignal(tuple((occ, x) for occ, x, _ in survivors))


def canceled_pairs(s: TctSignal) -> list[CanceledPair]:
    return cancel_pass(s.transitions)[1]


def state_at(s: WstSignal | TctSignal, t: float) -> int:
    """Value of the signal at time ``t``; a transition at ``t`` is already
    in effect (the state is constant on ``[t_n, t_{n+1})``)."""
    if isinstance(s, TctSignal):
        s = tct_to_wst(s)
    times = [tr.t for tr in s.transitions]
    k = bisect.bisect_right(times, t) - 1
    return s.transitions[max(k, 0)].x


def apply_shift(s: TctSignal, shift: PureShift) -> TctSignal:
    """Add ``delta_plus``/``delta_minus`` to the offsets of rising/falling
    transitions. Raises :class:`SignalError` if the result breaks S4."""
    trs = [s.transitions[0]]
    for tr in s.transitions[1:]:
        trs.append(TctTransition(tr.t, tr.x, tr.o + shift.for_value(tr.x)))
    return TctSignal(tuple(trs))
