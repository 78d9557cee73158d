"""Orthogonal space-time block codes: real lattice form, ML decoding, operation counts and SER simulation."""

from .codes import BUILTIN_NAMES, CodeSpec, CodeValidationError, builtin, encode, load_code, validate
from .complexity import OpCount, ScheduleLevel, count_decode, formula
from .decode import Constellation, decode_lattice, oracle_ml, quantize
from .lattice import LatticeSystem, build_check_H, symbolic_check_H
from .sim import SimConfig, run_monte_carlo

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_NAMES", "CodeSpec", "CodeValidationError", "builtin", "encode", "load_code", "validate",
    "OpCount", "ScheduleLevel", "count_decode", "formula",
    "Constellation", "decode_lattice", "oracle_ml", "quantize",
    "LatticeSystem", "build_check_H", "symbolic_check_H",
    "SimConfig", "run_monte_carlo",
]
