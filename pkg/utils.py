"""
Calibration Engine - Utilities Module

Common utilities shared across all pipeline modules.
This module provides:
- DotDict: Parameter dictionary accessor
- merge_parameter_dicts: Overlay user parameters on module defaults
- configure_logging: One stream handler for the whole package

Usage:
    from utils import DotDict, merge_parameter_dicts

    params = merge_parameter_dicts(get_default_parameters(), {"Planner": {"delta_min": 0.6}})
    p = DotDict(params)
    print(p.delta_min)
"""

import logging


LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _section_items(items):
    """
    Yield (key, value) pairs of one parameter section.

    A section is either the house list-of-single-key-dicts form
    ([{"delta_min": 0.5}, {"delta_max": 1.5}]) or a plain mapping.
    """
    if isinstance(items, dict):
        yield from items.items()
        return
    for item_dict in items:
        for key, value in item_dict.items():
            yield key, value


class DotDict:
    """
    Utility class to convert sectioned parameter dictionaries to dot-notation objects.

    Allows accessing parameters like p.delta_min instead of nested dict access.
    Section names are dropped, so keys must be unique across sections.

    Example:
        params = {
            "Planner": [
                {"delta_min": 0.5},
                {"delta_max": 1.5}
            ]
        }
        p = DotDict(params)
        print(p.delta_max)  # Access directly as attribute
    """
    def __init__(self, nested_dict):
        for category, items in nested_dict.items():
            for key, value in _section_items(items):
                setattr(self, key, value)

    def get(self, key, default=None):
        return getattr(self, key, default)


def flatten_parameters(parameters):
    """
    Flatten a sectioned parameter dictionary into {key: value}.

    Args:
        parameters: Sectioned parameter dictionary

    Returns:
        dict: Flat mapping of every key to its value
    """
    flat = {}
    for category, items in parameters.items():
        for key, value in _section_items(items):
            flat[key] = value
    return flat


def merge_parameter_dicts(*param_dicts):
    """
    Merge multiple sectioned parameter dictionaries, later ones winning per key.

    Sections keep the house list-of-single-key-dicts form in the result, and
    the key order of the first dictionary that introduces a key.

    Args:
        *param_dicts: Variable number of parameter dictionaries

    Returns:
        dict: Merged parameter dictionary

    Example:
        base_params = get_default_parameters()
        custom_params = {"Planner": {"delta_min": 0.6}}
        merged = merge_parameter_dicts(base_params, custom_params)
    """
    merged = {}
    for param_dict in param_dicts:
        if not param_dict:
            continue
        for category, items in param_dict.items():
            section = merged.setdefault(category, {})
            for key, value in _section_items(items):
                section[key] = value

    return {
        category: [{key: value} for key, value in section.items()]
        for category, section in merged.items()
    }


def configure_logging(verbosity=0):
    """
    Install a single stream handler on the root logger.

    Args:
        verbosity: 0 = WARNING, 1 = INFO, 2+ = DEBUG

    Returns:
        int: The logging level that was set
    """
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level)
    return level
