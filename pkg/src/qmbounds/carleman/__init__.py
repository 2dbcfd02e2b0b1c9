"""Carleman weights: symbols, brackets, certification, Morse weights, inequality tests."""

from .inequality import CarlemanTable, carleman_inequality_table, test_carleman_inequality
from .morse import (
    CompatibilityResult,
    CompatiblePair,
    CompatibilitySearchError,
    CriticalPoint,
    MorseError,
    MorseReport,
    RelocatedField,
    RelocationError,
    annulus_weight,
    check_compatibility,
    find_critical_points,
    generate_morse,
    make_compatible_pair,
    morse_report,
    normal_derivative,
    relocate_critical_points,
)
from .symbols import (
    CoordinateSymbol,
    ImPphi,
    OutsideDomainError,
    RePphi,
    SymbolPoint,
    bracket_closed_form,
    complex_bracket,
    conjugated_bracket,
    poisson_bracket,
    symbol_point,
)
from .weights import (
    CalibrationError,
    CarlemanWeight,
    Certificate,
    CriticalPointError,
    calibrate_gamma,
    certify_weight,
    char_radius_sq,
    sample_char_set,
)
