"""Exact sparse simulation of polarization-encoded Fock states in linear optics."""

from pathlib import Path

from .errors import LocError
from .fock import FockBasisVector, ModeId, Pol, PureState, vacuum
from .measurement import BellKind, ClickPattern, Detector, Semantics, bell_state, singlet

CIRCUITS = Path(__file__).parent / "circuits"
FIG1 = CIRCUITS / "fig1.loc"

__version__ = "0.1.0"

__all__ = [
    "CIRCUITS", "FIG1", "BellKind", "ClickPattern", "Detector", "FockBasisVector", "LocError",
    "ModeId", "Pol", "PureState", "Semantics", "bell_state", "singlet", "vacuum",
]
