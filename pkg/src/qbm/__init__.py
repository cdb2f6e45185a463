"""Breathing modes of two interacting particles in a harmonic trap."""

from .analysis import (
    FitError,
    FitFormulaParams,
    ResonanceSpectrum,
    TwoModeFit,
    eval_fit_formula,
    fit_formula_calibrate,
    fit_two_modes,
    scan_resonance,
)
from .config import (
    ConfigError,
    ExcitationModel,
    RunConfig,
    ScanModel,
    SolverModel,
    SystemModel,
    load_config,
    parse_config,
)
from .excitation import Modulation, SwitchOff
from .meanfield import (
    HartreeResult,
    RegimeWarning,
    SemiclassicalResult,
    hartree_frequency,
    semiclassical_frequency,
)
from .model import Symmetry, SystemSpec
from .observables import TimeSeries, asymptotic_energy
from .runner import (
    RunRecord,
    StageError,
    ground_info,
    run_scan,
    run_single,
    run_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ExcitationModel",
    "FitError",
    "FitFormulaParams",
    "HartreeResult",
    "Modulation",
    "RegimeWarning",
    "ResonanceSpectrum",
    "RunConfig",
    "RunRecord",
    "ScanModel",
    "SemiclassicalResult",
    "SolverModel",
    "StageError",
    "SwitchOff",
    "Symmetry",
    "SystemModel",
    "SystemSpec",
    "TimeSeries",
    "TwoModeFit",
    "asymptotic_energy",
    "eval_fit_formula",
    "fit_formula_calibrate",
    "fit_two_modes",
    "ground_info",
    "hartree_frequency",
    "load_config",
    "parse_config",
    "run_scan",
    "run_single",
    "run_sweep",
    "scan_resonance",
    "semiclassical_frequency",
]
