"""Shift-invariant dictionary learning for vibration condition monitoring."""
from .dictionary import Dictionary, Snapshot, init_dictionary, load_dictionary, normalize_atom, save_dictionary, \
    take_snapshot
from .encoder import EncodeResult, Event, StopCondition, best_event, correlate, encode, srr_db, subtract_event
from .learner import GradientAccumulator, LearnConfig, accumulate, apply_update, learn_step, residual_variance
from .monitor import Monitor, MonitorConfig, MonitorReport, center_frequency, event_rate, evolution_rate
from .signal_io import Signal, WindowPlan, load_signal, next_window, write_signal

__version__ = "0.1.0"

__all__ = [
    "Dictionary", "Snapshot", "init_dictionary", "load_dictionary", "normalize_atom", "save_dictionary",
    "take_snapshot", "EncodeResult", "Event", "StopCondition", "best_event", "correlate", "encode", "srr_db",
    "subtract_event", "GradientAccumulator", "LearnConfig", "accumulate", "apply_update", "learn_step",
    "residual_variance", "Monitor", "MonitorConfig", "MonitorReport", "center_frequency", "event_rate",
    "evolution_rate", "Signal", "WindowPlan", "load_signal", "next_window", "write_signal",
]
