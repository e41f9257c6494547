"""Equiaffine invariants of surfaces in R^4 and Lagrangian detection."""

from pathlib import Path

from .dsl import SurfaceChart, load_surface, parse_surface
from .frame import point_geometry
from .invariants import InvariantReport, invariant_report
from .lagrangian import LagrangianVerdict, SymplecticForm, decide, oracle_parallel_forms

__version__ = "0.1.0"

CHARTS_DIR = Path(__file__).parent / "charts"


def corpus_chart(name: str) -> SurfaceChart:
    """Load one of the bundled example charts by name (e.g. ``"cc"``)."""
    return load_surface(CHARTS_DIR / f"{name}.srf")


__all__ = [
    "CHARTS_DIR",
    "InvariantReport",
    "LagrangianVerdict",
    "SurfaceChart",
    "SymplecticForm",
    "corpus_chart",
    "decide",
    "invariant_report",
    "load_surface",
    "oracle_parallel_forms",
    "parse_surface",
    "point_geometry",
]
