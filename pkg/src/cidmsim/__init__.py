"""Composable involution delay model: delay functions, circuits and simulation."""

from .signals import (
    NEG_INF,
    PureShift,
    SignalError,
    TctSignal,
    WstSignal,
    apply_shift,
    canceled_pairs,
    tct_to_wst,
    validate_tct,
    validate_wst,
)
from .delay import (
    InvolutionPair,
    SwitchingWaveform,
    causality_check,
    derive_shift,
    ip_compose,
    make_exp_log_pair,
    make_exp_sym_pair,
    make_sampled_pair,
    pi_compose,
    solve_delta_min,
)
from .circuit import ChannelSpec, Circuit, DelaySpec, Edge, GateFunction, Vertex, chain
from .engine import CircuitError, SimResult, SimulationError, run, run_batch

__version__ = "0.1.0"
