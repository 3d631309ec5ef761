from ._common import AttackOutcome, read_trace, write_trace
from .eclipse import EclipseConfig, EclipseState, default_min_area, eclipse_attack, estimate_gradients
from .simba import dct_basis, low_frequency_directions, simba_attack, simba_dct_attack
from .square import p_selection, square_attack_linf, square_side

ATTACKS = ("eclipse", "simba", "simba-dct", "square")

# Parameters used for the automatic-detection and compression comparisons.
TABLE2_DEFAULTS = {
    "eclipse": {"step": 0.1, "beta": 0.1, "kernel_size": 3, "max_iters": 1000},
    "simba": {"step": 0.1, "beta": 0.1, "max_iters": 100000},
    "simba-dct": {"step": 0.1, "beta": 0.1, "max_iters": 100000},
    "square": {"step": 0.1, "beta": 0.1, "p_init": 0.2, "max_iters": 10000},
}

__all__ = [
    "ATTACKS",
    "AttackOutcome",
    "EclipseConfig",
    "EclipseState",
    "TABLE2_DEFAULTS",
    "dct_basis",
    "default_min_area",
    "eclipse_attack",
    "estimate_gradients",
    "low_frequency_directions",
    "p_selection",
    "read_trace",
    "simba_attack",
    "simba_dct_attack",
    "square_attack_linf",
    "square_side",
    "write_trace",
]
