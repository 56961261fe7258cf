"""Local cellular-automaton decoders for the repetition code."""
from .lattice import (
    DecoderState,
    LatticeError,
    Ring,
    SiteRegisters,
    StackOverflow,
    Window,
    WindowOverflow,
    defects_from_error,
    logical_state,
    prefix_charge,
    site_charge,
    total_charge,
)
from .signal_rules import SignalRuleParams, asr_iteration, asr_run, ssr_iteration, ssr_run

__version__ = "0.1.0"
