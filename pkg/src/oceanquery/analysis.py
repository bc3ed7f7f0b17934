"""Numerical routines over series and grids.

Statistics use population (not sample) standard deviation and numpy's
pairwise summation, so results are platform-stable in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from typing import Optional

import numpy as np

from .core import (
    GridSlice,
    OceanQueryError,
    Point,
    Series,
    SummaryStats,
    TimeRange,
)


class EmptySeries(OceanQueryError):
    code = "EmptySeries"


class InsufficientData(OceanQueryError):
    code = "InsufficientData"


class DegenerateTime(OceanQueryError):
    code = "DegenerateTime"


class MissingBaselineEntry(OceanQueryError):
    code = "MissingBaselineEntry"


class FullyMasked(OceanQueryError):
    code = "FullyMasked"


class NoValidNode(OceanQueryError):
    code = "NoValidNode"


EARTH_RADIUS_KM = 6371.0

SECONDS_PER_YEAR = 365.25 * 86400.0


def summary_stats(s: Series) -> SummaryStats:
    """Min/max/mean/std over non-missing values.

    argmin/argmax report the earliest timestamp attaining each extremum.
    """
    pairs = s.non_missing()
    if not pairs:
        raise EmptySeries("series has no non-missing values")
    values = np.array([v for _, v in pairs], dtype=np.float64)
    i_min = int(np.argmin(values))
    i_max = int(np.argmax(values))
    v_min, v_max = float(values[i_min]), float(values[i_max])
    # pairwise summation can land one ulp outside [min, max] for
    # near-identical values; clamp to keep the stats invariant exact
    mean = min(max(float(values.mean()), v_min), v_max)
    return SummaryStats(
        min=v_min,
        max=v_max,
        mean=mean,
        std=float(values.std()),  # population std (ddof=0)
        argmin_time=pairs[i_min][0],
        argmax_time=pairs[i_max][0],
        count=len(pairs),
    )


@dataclass(frozen=True)
class TrendResult:
    slope: float  # unit per year
    intercept: float
    r_squared: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("trend requires n >= 2")
        if not 0.0 <= self.r_squared <= 1.0:
            raise ValueError("r_squared out of [0, 1]")


def linear_trend(s: Series) -> TrendResult:
    """Ordinary least squares of value against time in years since the
    first non-missing point; slope reported per year."""
    pairs = s.non_missing()
    if len(pairs) < 2:
        raise InsufficientData(f"need >= 2 non-missing points, got {len(pairs)}")
    t0 = pairs[0][0]
    t = np.array([(ts - t0).total_seconds() / SECONDS_PER_YEAR for ts, _ in pairs])
    y = np.array([v for _, v in pairs], dtype=np.float64)
    if np.all(t == t[0]):
        raise DegenerateTime("all timestamps equal")
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = 0.0  # constant response: r^2 defined as 0 by convention
    else:
        r2 = max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return TrendResult(float(slope), float(intercept), r2, len(pairs))


@dataclass(frozen=True)
class Baseline:
    """Per-calendar-month climatology: month number -> (mean, count)."""

    climatology: dict
    reference_span: TimeRange

    def __post_init__(self):
        for month, (mean, count) in self.climatology.items():
            if count < 1:
                raise ValueError(f"climatology entry for month {month} has count {count}")


def baseline_of(s: Series, resolution=None) -> Baseline:
    """Monthly climatology computed from the series itself."""
    from .core import Resolution

    buckets: dict = {}
    for ts, v in s.non_missing():
        buckets.setdefault(ts.month, []).append(v)
    if not buckets:
        raise EmptySeries("cannot build baseline from fully-masked series")
    clim = {m: (float(np.mean(vs)), len(vs)) for m, vs in buckets.items()}
    span = TimeRange(s.timestamps[0], s.timestamps[-1], resolution or Resolution.MONTHLY)
    return Baseline(clim, span)


def anomaly(s: Series, b: Baseline) -> Series:
    """Pointwise series minus climatology of each timestamp's calendar
    month; masked points stay masked."""
    out = []
    for ts, v in zip(s.timestamps, s.values):
        if v is None:
            out.append(None)
            continue
        if ts.month not in b.climatology:
            raise MissingBaselineEntry(f"no baseline entry for calendar month {ts.month}")
        out.append(v - b.climatology[ts.month][0])
    return Series(
        timestamps=s.timestamps,
        values=tuple(out),
        unit=s.unit,
        datum=s.datum,
        variable=s.variable,
    )


def threshold_mask(g: GridSlice, threshold: float) -> tuple:
    """Boolean exceedance grid and exceed fraction.

    A cell is True iff it is unmasked and its value >= threshold; the
    fraction is true-count / unmasked-count.
    """
    unmasked = 0
    exceed = 0
    mask_rows = []
    for row in g.values:
        mask_row = []
        for v in row:
            hit = v is not None and v >= threshold
            if v is not None:
                unmasked += 1
                if hit:
                    exceed += 1
            mask_row.append(hit)
        mask_rows.append(tuple(mask_row))
    if unmasked == 0:
        raise FullyMasked("grid has no unmasked cells")
    return tuple(mask_rows), exceed / unmasked


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in km, mean Earth radius 6371.0 km."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dphi = p2 - p1
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dlam / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(a)))


def nearest_node(p: Point, nodes) -> tuple:
    """Index and distance (km) of the valid node nearest to ``p``.

    ``nodes`` is a sequence of (lat, lon, valid) triples. Ties break to
    the lowest index.
    """
    best: Optional[tuple] = None
    for i, (lat, lon, valid) in enumerate(nodes):
        if not valid:
            continue
        d = haversine_km(p.lat, p.lon, lat, lon)
        if best is None or d < best[1]:
            best = (i, d)
    if best is None:
        raise NoValidNode("no valid node among candidates")
    return best
