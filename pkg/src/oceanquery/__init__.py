"""Grounded oceanographic question answering over NOAA data products."""

from .core import (
    BBox,
    FigureRef,
    GridSlice,
    NamedRegion,
    Point,
    Provenance,
    Resolution,
    Series,
    Station,
    StationRef,
    SummaryStats,
    TimeRange,
    ToolResponse,
    Variable,
    canonical_unit,
)

__all__ = [
    "BBox", "FigureRef", "GridSlice", "NamedRegion", "Point", "Provenance",
    "Resolution", "Series", "Station", "StationRef", "SummaryStats",
    "TimeRange", "ToolResponse", "Variable", "canonical_unit",
]

__version__ = "0.1.0"
