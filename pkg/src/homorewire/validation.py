"""Input checks shared by the estimators."""
import numbers

from .network import ATTRIBUTES, BipartiteNetwork

MODES = ("stay_weighted", "distinct_pairs")


def check_network(network, require_edges=True):
    if not isinstance(network, BipartiteNetwork):
        raise TypeError(f"expected a BipartiteNetwork, got {type(network).__name__}")
    if require_edges and network.total_weight <= 0:
        raise ValueError(f"{network.slice_key}: network has no stays to analyse")
    return network


def check_unit_interval(value, name, low_open=False):
    if not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number")
    ok = (0.0 < value <= 1.0) if low_open else (0.0 <= value <= 1.0)
    if not ok:
        bound = "(0, 1]" if low_open else "[0, 1]"
        raise ValueError(f"{name} must lie in {bound}, got {value}")
    return float(value)


def check_attribute(attribute):
    if attribute not in ATTRIBUTES:
        raise ValueError(f"attribute must be one of {ATTRIBUTES}, got {attribute!r}")
    return attribute


def check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


def check_level(level):
    if not (0.0 < level < 1.0):
        raise ValueError(f"level must lie in (0, 1), got {level}")
    return float(level)
