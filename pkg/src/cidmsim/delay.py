"""Involution delay functions and their compositions.

A delay function maps ``T``, the time from the previous output transition to
the current input transition, to the input-to-output delay. An involution
pair ``(up, down)`` satisfies ``-up(-down(T)) == T``. Every function here can
produce its exact partner under the reflection ``T -> -f^{-1}(-T)``.

Evaluation at ``T = +inf`` (the first transition after the initial one) returns
the function's *settled* delay instead of a limit; see ``settled``.
"""

from __future__ import annotations

import logging
import math
import sys
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .signals import NEG_INF, PureShift, TctSignal, TctTransition, WstSignal

log = logging.getLogger(__name__)

CLOSED_FORM_TOL = 1e-9
SAMPLED_TOL = 1e-6
BISECT_WIDTH = 1e-13
BISECT_MAXITER = 200


class DomainError(ValueError):
    """A delay function was evaluated outside its domain."""


class CausalityError(ValueError):
    pass


class DelayFunction:
    """Strictly increasing, concave delay function of ``T``.

    Subclasses implement ``_eval`` for finite ``T``, ``reflect`` and the
    ``domain_min``/``settled`` attributes.
    """

    domain_min: float = NEG_INF  # exclusive lower bound of the domain
    settled: float  # value used for T = +inf

    def __call__(self, T: float) -> float:
        if T == math.inf:
            return self.settled
        if not T > self.domain_min:
            raise DomainError(f"{self!r} evaluated at T={T!r} <= {self.domain_min!r}")
        return self._eval(T)

    def _eval(self, T: float) -> float:
        raise NotImplementedError

    def many(self, T: np.ndarray) -> np.ndarray:
        """Vectorized evaluation; NaN outside the domain."""
        T = np.asarray(T, dtype=float)
        out = np.full(T.shape, np.nan)
        ok = T > self.domain_min
        out[ok] = self._many(T[ok])
        out[T == math.inf] = self.settled
        return out

    def _many(self, T):
        return np.array([self._eval(t) for t in T], dtype=float)

    def reflect(self) -> "DelayFunction":
        raise NotImplementedError

    def shifted(self, out_shift: float, in_shift: float) -> "DelayFunction":
        """``T -> out_shift + self(T + in_shift)``."""
        if out_shift == 0.0 and in_shift == 0.0:
            return self
        return Shifted(self, out_shift, in_shift)


@dataclass(frozen=True, eq=True)
class ExpDown(DelayFunction):
    """``delta_inf - (delta_inf - delta_min) * exp(-(T + delta_min) / tau)``."""

    delta_min: float
    delta_inf: float
    tau: float

    @property
    def settled(self):
        return self.delta_inf

    def _eval(self, T):
        arg = -(T + self.delta_min) / self.tau
        if arg > 700.0:
            return NEG_INF
        return self.delta_inf - (self.delta_inf - self.delta_min) * math.exp(arg)

    def _many(self, T):
        arg = -(T + self.delta_min) / self.tau
        with np.errstate(over="ignore"):
            out = self.delta_inf - (self.delta_inf - self.delta_min) * np.exp(arg)
        out[arg > 700.0] = NEG_INF
        return out

    def reflect(self):
        return LogUp(self.delta_min, self.delta_inf, self.tau)


@dataclass(frozen=True, eq=True)
class LogUp(DelayFunction):
    """``delta_min + tau * ln((T + delta_inf) / (delta_inf - delta_min))``.

    Unbounded as ``T`` grows; its settled value is ``delta_inf`` by
    convention, matching its partner :class:`ExpDown`.
    """

    delta_min: float
    delta_inf: float
    tau: float

    @property
    def domain_min(self):
        return -self.delta_inf

    @property
    def settled(self):
        return self.delta_inf

    def _eval(self, T):
        return self.delta_min + self.tau * math.log((T + self.delta_inf) / (self.delta_inf - self.delta_min))

    def _many(self, T):
        return self.delta_min + self.tau * np.log((T + self.delta_inf) / (self.delta_inf - self.delta_min))

    def reflect(self):
        return ExpDown(self.delta_min, self.delta_inf, self.tau)


@dataclass(frozen=True, eq=True)
class ExpSym(DelayFunction):
    """Self-dual exponential channel ``delta_inf + tau * ln(1 - exp(-(T + delta_inf) / tau))``.

    Bounded by ``delta_inf`` and its own involution partner.
    """

    delta_inf: float
    tau: float

    @property
    def domain_min(self):
        return -self.delta_inf

    @property
    def settled(self):
        return self.delta_inf

    def _eval(self, T):
        return self.delta_inf + self.tau * math.log1p(-math.exp(-(T + self.delta_inf) / self.tau))

    def _many(self, T):
        return self.delta_inf + self.tau * np.log1p(-np.exp(-(T + self.delta_inf) / self.tau))

    def reflect(self):
        return self


@dataclass(frozen=True, eq=True)
class Shifted(DelayFunction):
    base: DelayFunction
    out_shift: float
    in_shift: float

    @property
    def domain_min(self):
        return self.base.domain_min - self.in_shift

    @property
    def settled(self):
        return self.out_shift + self.base.settled

    def _eval(self, T):
        return self.out_shift + self.base(T + self.in_shift)

    def _many(self, T):
        return self.out_shift + self.base.many(T + self.in_shift)

    def reflect(self):
        # -g^{-1}(-T) for g(T) = a + f(T + b) is b + f_r(T + a)
        return Shifted(self.base.reflect(), self.in_shift, self.out_shift)


@dataclass(frozen=True, eq=True)
class SampledMonotone(DelayFunction):
    """Piecewise-linear interpolation through ``(T_i, delay_i)`` samples.

    Samples must be strictly increasing in both coordinates with
    non-increasing slopes, so the interpolant is concave. Below the first
    sample the function is undefined; above the last it stays flat at the
    last delay, which is also its settled value.
    """

    ts: tuple[float, ...]
    ds: tuple[float, ...]

    def __post_init__(self):
        ts = tuple(float(v) for v in self.ts)
        ds = tuple(float(v) for v in self.ds)
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "ds", ds)
        if len(ts) != len(ds) or len(ts) < 2:
            raise ValueError("need at least two (T, delay) samples of equal length")
        dt = np.diff(ts)
        dd = np.diff(ds)
        if np.any(dt <= 0) or np.any(dd <= 0):
            raise ValueError("samples must be strictly increasing in T and delay")
        slopes = dd / dt
        if np.any(np.diff(slopes) > 1e-9 * np.maximum(1.0, np.abs(slopes[1:]))):
            raise ValueError("samples are not concave")

    @property
    def domain_min(self):
        # the first sample itself is in the domain
        return math.nextafter(self.ts[0], NEG_INF)

    @property
    def settled(self):
        return self.ds[-1]

    def _eval(self, T):
        if T > self.ts[-1]:
            _warn_flat(self)
            return self.ds[-1]
        return float(np.interp(T, self.ts, self.ds))

    def reflect(self):
        return SampledMonotone(tuple(-d for d in reversed(self.ds)), tuple(-t for t in reversed(self.ts)))

    @classmethod
    def from_function(cls, f: DelayFunction, ts: Sequence[float]) -> "SampledMonotone":
        return cls(tuple(ts), tuple(f(t) for t in ts))


_flat_warned: set[int] = set()


def _warn_flat(f):
    if id(f) not in _flat_warned:
        _flat_warned.add(id(f))
        log.warning("sampled delay function evaluated beyond its last sample; using flat extension")


@dataclass(frozen=True)
class InvolutionPair:
    """Rising/falling delay functions with shared fixed point ``delta_min``."""

    up: DelayFunction
    down: DelayFunction
    delta_min: float
    tol: float = CLOSED_FORM_TOL

    def check(self, grid: Sequence[float] | None = None) -> "PairCheck":
        return check_pair(self, grid)


@dataclass(frozen=True)
class PairCheck:
    involution_residual: float
    fixed_point_residual: float
    up0: float
    down0: float
    monotone: bool
    concave: bool
    tol: float

    @property
    def ok(self) -> bool:
        return (
            self.involution_residual < self.tol
            and self.fixed_point_residual < self.tol
            and self.up0 > 0
            and self.down0 > 0
            and self.monotone
            and self.concave
        )


def saturation_limit(f: DelayFunction, start: float, scale: float, budget: float = 1e-11) -> float:
    """Largest ``T`` at which ``f`` is still steep enough to invert.

    Rounding ``f(T)`` to double precision moves the round trip
    ``-g(-f(T))`` by about ``eps * |f(T)| / f'(T)``; past the returned point
    that exceeds ``budget``. The slope is a forward secant, which for a
    concave ``f`` underestimates it. ``inf`` for functions that grow past
    their settled value. ``start`` must lie in the domain of ``f``.
    """
    big = 1e6 * scale
    if f(big) > f.settled:
        return math.inf
    h = 1e-3 * scale
    eps = sys.float_info.epsilon

    def ok(T):
        y = f(T)
        return (f(T + h) - y) / h * budget >= eps * max(abs(y), scale)

    lo, hi = start, big
    if not ok(lo):
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * scale:
            break
    return lo


def default_grid(pair: InvolutionPair, n: int = 1000) -> np.ndarray:
    """``n`` points of ``T`` spanning the numerically meaningful part of both
    domains: both functions stay invertible to well below the check tolerance
    at every point (see :func:`saturation_limit`)."""
    scale = max(pair.delta_min, abs(pair.up.settled), abs(pair.down.settled))
    lo = max(-3.0 * scale, pair.up.domain_min, pair.down.domain_min)
    hi = 3.0 * scale
    for f in (pair.up, pair.down):
        hi = min(hi, saturation_limit(f, -pair.delta_min, scale))
    return np.linspace(lo + 0.02 * (hi - lo), hi, n)


def check_pair(pair: InvolutionPair, grid: Sequence[float] | None = None) -> PairCheck:
    grid = default_grid(pair) if grid is None else np.asarray(grid, dtype=float)
    res = 0.0
    for f, g in ((pair.up, pair.down), (pair.down, pair.up)):
        with np.errstate(invalid="ignore"):
            r = np.abs(-f.many(-g.many(grid)) - grid)
        r = r[np.isfinite(r)]  # points outside a domain are skipped
        if r.size:
            res = max(res, float(r.max()))
    d = pair.delta_min
    # f(-d) - d has slope -(1 + f') in d, so either residual bounds |d - d*|;
    # the flatter function gives the tighter bound
    fp = min(abs(pair.up(-d) - d), abs(pair.down(-d) - d))
    mono, conc = True, True
    for f in (pair.up, pair.down):
        v = f.many(grid)
        v = v[np.isfinite(v)]
        if len(v) >= 3:
            d1 = np.diff(v)
            d2 = np.diff(d1)
            mono &= bool(np.all(d1 > 0))
            conc &= bool(np.all(d2 <= pair.tol * max(1.0, float(np.max(np.abs(v))))))
    return PairCheck(res, fp, pair.up(0.0), pair.down(0.0), mono, conc, pair.tol)


def make_exp_log_pair(delta_min: float, delta_inf: float, tau: float) -> InvolutionPair:
    """Exact involution pair with an exponential falling and a logarithmic
    rising delay function, both passing through ``(-delta_min, delta_min)``."""
    if not (0 < delta_min < delta_inf) or not tau > 0:
        raise ValueError(
            f"need 0 < delta_min < delta_inf and tau > 0, got {delta_min}, {delta_inf}, {tau}"
        )
    down = ExpDown(delta_min, delta_inf, tau)
    return InvolutionPair(down.reflect(), down, delta_min)


def make_exp_sym_pair(delta_inf: float, tau: float) -> InvolutionPair:
    if not (delta_inf > 0 and tau > 0):
        raise ValueError("need delta_inf > 0 and tau > 0")
    f = ExpSym(delta_inf, tau)
    if not f(0.0) > 0:
        raise CausalityError(f"exp-sym channel with delta_inf={delta_inf}, tau={tau} is not strictly causal")
    return InvolutionPair(f, f, solve_delta_min(f, f))


def make_sampled_pair(ts: Sequence[float], ds: Sequence[float], up_ts=None, up_ds=None) -> InvolutionPair:
    """Pair from a sampled falling delay function.

    The rising function is its exact reflection unless an explicit table is
    given, in which case the pair is rejected when the involution residual
    exceeds the sampled tolerance.
    """
    down = SampledMonotone(tuple(ts), tuple(ds))
    if up_ts is None:
        up = down.reflect()
    else:
        up = SampledMonotone(tuple(up_ts), tuple(up_ds))
    dmin = solve_delta_min(up, down, tol=SAMPLED_TOL)
    pair = InvolutionPair(up, down, dmin, SAMPLED_TOL)
    if up_ts is not None:
        lo = max(down.ts[0], -up.ds[-1])
        hi = min(down.ts[-1], -up.ds[0])
        grid = np.linspace(lo, hi, 400)[1:-1]
        worst = 0.0
        for T in grid:
            try:
                worst = max(worst, abs(-up(-down(T)) - T))
            except DomainError:
                continue
        if worst > SAMPLED_TOL:
            raise ValueError(f"sampled up/down tables are not an involution (residual {worst:.3g})")
    return pair


def solve_delta_min(up: DelayFunction, down: DelayFunction | None = None, bracket=None,
                    tol: float = 1e-12) -> float:
    """Unique positive fixed point ``d`` of ``up(-d) = d``.

    Bisection on ``g(d) = up(-d) - d``, which is strictly decreasing. The
    result is checked against ``down`` when given.
    """

    def g(d):
        T = -d
        if not T > up.domain_min:
            return -math.inf
        return up(T) - d

    if bracket is None:
        lo = 0.0
        hi = up(0.0)
        if not hi > 0:
            raise CausalityError(f"up(0) = {hi!r} <= 0, no positive fixed point")
    else:
        lo, hi = bracket
    glo, ghi = g(lo), g(hi)
    if not (glo > 0 >= ghi or glo >= 0 > ghi):
        raise CausalityError(f"no sign change of up(-d) - d on [{lo}, {hi}] ({glo!r}, {ghi!r})")
    for _ in range(BISECT_MAXITER):
        if hi - lo <= BISECT_WIDTH:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        gm = g(mid)
        if gm > 0:
            lo = mid
        elif gm < 0:
            hi = mid
        else:
            lo = hi = mid
            break
    d = 0.5 * (lo + hi)
    if down is not None:
        r = abs(down(-d) - d)
        if r > max(tol, 1e-9) * max(1.0, d) and r > 1e3 * BISECT_WIDTH:
            raise CausalityError(f"up and down disagree on the fixed point (residual {r:.3g})")
    return d


@dataclass(frozen=True)
class CidmDelayPair:
    """Delay functions of a pure-delay shifter followed by an involution channel."""

    up: DelayFunction
    down: DelayFunction
    dup_min: float
    ddo_min: float
    shift: PureShift
    base: InvolutionPair

    def recover_base(self) -> tuple[DelayFunction, DelayFunction]:
        """Undo the shift: ``base.up(T) = up(T - dp) - dp`` and likewise down."""
        dp, dm = self.shift.delta_plus, self.shift.delta_minus
        return Shifted(self.up, -dp, -dp), Shifted(self.down, -dm, -dm)


def pi_compose(shift: PureShift, base: InvolutionPair) -> CidmDelayPair:
    dp, dm = shift.delta_plus, shift.delta_minus
    return CidmDelayPair(
        up=base.up.shifted(dp, dp),
        down=base.down.shifted(dm, dm),
        dup_min=base.delta_min + dp,
        ddo_min=base.delta_min + dm,
        shift=shift,
        base=base,
    )


@dataclass(frozen=True)
class Causality:
    causal: bool
    up_margin: float  # delta_plus + base.up(delta_minus)
    down_margin: float  # delta_minus + base.down(delta_plus)


def causality_check(base: InvolutionPair, shift: PureShift) -> Causality:
    """Strict causality of ``base`` followed by ``shift``.

    For a true involution pair both margins are positive or neither is; a
    disagreement beyond the pair tolerance is raised as an error.
    """
    dp, dm = shift.delta_plus, shift.delta_minus
    try:
        up_m = dp + base.up(dm)
    except DomainError:
        up_m = NEG_INF
    try:
        down_m = dm + base.down(dp)
    except DomainError:
        down_m = NEG_INF
    a, b = up_m > 0, down_m > 0
    if a != b and min(abs(up_m), abs(down_m)) > base.tol:
        raise CausalityError(
            f"causality margins disagree ({up_m!r}, {down_m!r}); pair is not an involution"
        )
    return Causality(a and b, up_m, down_m)


def ip_compose(base: InvolutionPair, shift: PureShift) -> InvolutionPair:
    """Involution channel followed by a pure-delay shifter; again an
    involution pair, with its own fixed point."""
    c = causality_check(base, shift)
    if not c.causal:
        raise CausalityError(
            f"shift ({shift.delta_plus}, {shift.delta_minus}) makes the channel non-causal "
            f"(margins {c.up_margin!r}, {c.down_margin!r})"
        )
    if shift.is_zero:
        return base
    dp, dm = shift.delta_plus, shift.delta_minus
    up = base.up.shifted(dp, dm)
    down = base.down.shifted(dm, dp)
    return InvolutionPair(up, down, solve_delta_min(up, down, tol=base.tol), base.tol)


@dataclass(frozen=True)
class SwitchingWaveform:
    """Saturating exponential switching waveform from 0 to ``vdd`` (rising)
    or ``vdd`` to 0 (falling), starting at ``t = 0``."""

    rising: bool
    tau: float
    vdd: float = 1.0

    def __post_init__(self):
        if not (self.tau > 0 and self.vdd > 0):
            raise ValueError("tau and vdd must be positive")

    def value(self, t: float) -> float:
        if t <= 0:
            return 0.0 if self.rising else self.vdd
        e = math.exp(-t / self.tau)
        return self.vdd * (1.0 - e) if self.rising else self.vdd * e

    def inverse(self, v: float) -> float:
        if not 0 < v < self.vdd:
            raise ValueError(f"voltage {v!r} outside (0, {self.vdd!r})")
        if self.rising:
            return -self.tau * math.log1p(-v / self.vdd)
        return -self.tau * math.log(v / self.vdd)


def derive_shift(wave_up: SwitchingWaveform, wave_down: SwitchingWaveform,
                 vth_in_star: float, vth_in: float) -> PureShift:
    """Pure delays induced by discretizing an input at ``vth_in`` instead of
    the matching threshold ``vth_in_star``."""
    if not wave_up.rising or wave_down.rising:
        raise ValueError("expected a rising and a falling waveform")
    dp = wave_up.inverse(vth_in_star) - wave_up.inverse(vth_in)
    dm = wave_down.inverse(vth_in_star) - wave_down.inverse(vth_in)
    if vth_in != vth_in_star:
        # rising input reaches a lower threshold earlier, falling input later
        expect_up_positive = vth_in < vth_in_star
        assert (dp > 0) == expect_up_positive and (dm < 0) == expect_up_positive, (dp, dm)
    return PureShift(dp, dm)


def idm_response(s: WstSignal, pair: InvolutionPair) -> TctSignal:
    """Output of an involution channel fed by ``s``, as a TCT signal.

    Each transition is delayed by ``pair.up``/``pair.down`` of the time since
    the previous output occurrence; nothing is removed.
    """
    out = [TctTransition(NEG_INF, s.initial, 0.0)]
    prev_occ = NEG_INF
    for t, x in s.transitions[1:]:
        f = pair.up if x == 1 else pair.down
        o = f(t - prev_occ)
        out.append(TctTransition(t, x, o))
        prev_occ = t + o
    return TctSignal(tuple(out))
