"""Wire-level clients for the four NOAA data families (CO-OPS real-time
JSON, CO-OPS monthly CSV, CORA NetCDF subsets, CRW gridded SST), behind a
record/replay transport.

In Replay mode no network connection is ever opened: every response is
served from a content-addressed fixture store keyed by a request
fingerprint (URL + normalized params). RecordThenReplay writes records
through the same code path that later replays them, so fingerprints can
never skew.
"""

from __future__ import annotations

import hashlib
import io
import json
import threading
import time as _time
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from enum import Enum
from pathlib import Path
from typing import Callable, Optional
from urllib.parse import urlencode, urlsplit

import numpy as np

from . import analysis
from .core import (
    BBox,
    GridSlice,
    NamedRegion,
    OceanQueryError,
    Point,
    Resolution,
    Series,
    TimeRange,
    Variable,
    UTC,
    canonical_unit,
    ts_format,
    validate_time_range,
)


class StationUnknown(OceanQueryError):
    code = "StationUnknown"


class ProviderError(OceanQueryError):
    code = "ProviderError"

    def __init__(self, msg: str, retryable: bool = False):
        super().__init__(msg)
        self.retryable = retryable


class GapOnly(OceanQueryError):
    code = "GapOnly"


class FormatError(OceanQueryError):
    code = "FormatError"


class TransportMode(Enum):
    LIVE = "live"
    REPLAY = "replay"
    RECORD_THEN_REPLAY = "record_then_replay"


@dataclass(frozen=True)
class RawRecord:
    request_fingerprint: str
    body: bytes
    content_type: str
    fetched_at: datetime


def request_fingerprint(url: str, params: dict) -> str:
    canon = url + "?" + urlencode(sorted((k, str(v)) for k, v in params.items()))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _default_http_fetcher(url: str, params: dict, timeout: float):
    import httpx

    resp = httpx.get(url, params=params, timeout=timeout)
    if resp.status_code != 200:
        raise ProviderError(
            f"HTTP {resp.status_code} from {url}: {resp.text[:200]}", retryable=True
        )
    return resp.content, resp.headers.get("content-type", "application/octet-stream")


class Transport:
    """Shared, thread-safe fetch layer with fixture record/replay.

    The fixture store is a directory of fingerprint-named body files plus
    an ``index.json`` manifest mapping fingerprint -> request metadata.
    """

    def __init__(
        self,
        mode: TransportMode,
        cache_dir,
        rate_limit: float = 2.0,
        timeout: float = 30.0,
        fetcher: Optional[Callable] = None,
        clock: Optional[Callable[[], datetime]] = None,
    ):
        self.mode = mode
        self.cache_dir = Path(cache_dir)
        self.rate_limit = rate_limit
        self.timeout = timeout
        self._fetcher = fetcher or _default_http_fetcher
        self._clock = clock or (lambda: datetime.now(UTC))
        self._lock = threading.Lock()
        self._last_request: dict = {}  # host -> monotonic seconds
        self._index: dict = {}
        index_path = self.cache_dir / "index.json"
        if index_path.exists():
            self._index = json.loads(index_path.read_text())

    def get(self, url: str, params: dict) -> RawRecord:
        fp = request_fingerprint(url, params)
        if self.mode is TransportMode.REPLAY:
            return self._replay(fp, url)
        if self.mode is TransportMode.RECORD_THEN_REPLAY and fp in self._index:
            return self._replay(fp, url)
        return self._fetch_live(fp, url, params)

    def _replay(self, fp: str, url: str) -> RawRecord:
        meta = self._index.get(fp)
        if meta is None:
            raise ProviderError(f"no recorded fixture for {url} (fingerprint {fp[:12]})")
        body = (self.cache_dir / meta["file"]).read_bytes()
        return RawRecord(
            request_fingerprint=fp,
            body=body,
            content_type=meta["content_type"],
            fetched_at=datetime.fromisoformat(meta["fetched_at"].replace("Z", "+00:00")),
        )

    def _fetch_live(self, fp: str, url: str, params: dict) -> RawRecord:
        with self._lock:  # coalesces identical concurrent requests
            if fp in self._index:
                return self._replay(fp, url)
            host = urlsplit(url).netloc
            if self.rate_limit > 0 and host in self._last_request:
                wait = 1.0 / self.rate_limit - (_time.monotonic() - self._last_request[host])
                if wait > 0:
                    _time.sleep(wait)
            body, content_type = self._fetcher(url, params, self.timeout)
            self._last_request[host] = _time.monotonic()
            rec = RawRecord(fp, body, content_type, self._clock())
            if self.mode is TransportMode.RECORD_THEN_REPLAY:
                self._store(rec, url, params)
            return rec

    def _store(self, rec: RawRecord, url: str, params: dict):
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        fname = rec.request_fingerprint + ".bin"
        tmp = self.cache_dir / (fname + ".tmp")
        tmp.write_bytes(rec.body)
        tmp.rename(self.cache_dir / fname)
        self._index[rec.request_fingerprint] = {
            "url": url,
            "params": {k: str(v) for k, v in params.items()},
            "file": fname,
            "content_type": rec.content_type,
            "fetched_at": ts_format(rec.fetched_at),
        }
        (self.cache_dir / "index.json").write_text(
            json.dumps(self._index, indent=1, sort_keys=True)
        )


@dataclass
class FetchResult:
    """What a client fetch hands to the dispatcher: the data product, the
    processing steps for provenance, and the provider retrieval time."""

    series: Optional[Series] = None
    grid: Optional[GridSlice] = None
    steps: list = field(default_factory=list)
    retrieved_at: Optional[datetime] = None
    extra: dict = field(default_factory=dict)


_INTERVAL_PRODUCT = {
    Resolution.HOURLY: ("hourly_height", "hourly"),
    Resolution.SIX_MINUTE: ("water_level", "6min"),
}


class NoaaClients:
    """The four Table-style dataset clients over one Transport."""

    def __init__(self, transport: Transport, config: dict, regions: Optional[dict] = None):
        self.transport = transport
        self.config = config
        self.coverage = config["coverage"]
        self.regions = regions or {}

    # -- CO-OPS real-time water level (JSON) --------------------------------

    def plan_water_level_requests(self, station: str, tr: TimeRange, datum: str,
                                  interval: Resolution) -> list:
        """(url, params) per chunk; long ranges split at the provider's
        per-request window."""
        ep = self.config["endpoints"]["coops"]
        product, window_key = _INTERVAL_PRODUCT[interval]
        window = timedelta(days=ep["window_days"][window_key])
        chunks = []
        start = tr.start
        while start < tr.end:
            end = min(start + window, tr.end)
            params = {
                "product": product,
                "application": ep.get("application", "oceanquery"),
                "begin_date": start.strftime("%Y%m%d %H:%M"),
                "end_date": end.strftime("%Y%m%d %H:%M"),
                "datum": datum,
                "station": station,
                "time_zone": "gmt",
                "units": "metric",
                "format": "json",
            }
            chunks.append((ep["base_url"], params))
            start = end + timedelta(minutes=1)
        return chunks

    def fetch_water_level(self, station: str, tr: TimeRange, datum: str = "MSL",
                          interval: Resolution = Resolution.HOURLY) -> FetchResult:
        if not station:
            raise StationUnknown("empty station id")
        tr, notes = validate_time_range(tr, Variable.WATER_LEVEL, self.coverage)
        requests = self.plan_water_level_requests(station, tr, datum, interval)
        steps = list(notes)
        steps.append(
            f"fetched {_INTERVAL_PRODUCT[interval][0]} for station {station} "
            f"({ts_format(tr.start)}..{ts_format(tr.end)}, datum {datum}, metric units)"
        )
        if len(requests) > 1:
            steps.append(f"split range into {len(requests)} provider-window chunks and concatenated")
        timestamps, values = [], []
        retrieved_at = None
        for url, params in requests:
            rec = self.transport.get(url, params)
            retrieved_at = rec.fetched_at
            for t, v in self._parse_coops_json(rec, station):
                if timestamps and t <= timestamps[-1]:
                    continue  # chunk-boundary duplicate
                timestamps.append(t)
                values.append(v)
        if not timestamps or all(v is None for v in values):
            raise GapOnly(f"no valid water-level observations for station {station}")
        masked = sum(1 for v in values if v is None)
        if masked:
            steps.append(f"masked {masked} flagged or missing observations")
        series = Series(tuple(timestamps), tuple(values), "m", Variable.WATER_LEVEL, datum)
        return FetchResult(series=series, steps=steps, retrieved_at=retrieved_at)

    @staticmethod
    def _parse_coops_json(rec: RawRecord, station: str):
        try:
            payload = json.loads(rec.body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ProviderError(f"unparseable CO-OPS payload: {rec.body[:80]!r}") from e
        if "error" in payload:
            msg = payload["error"].get("message", "unknown provider error")
            if "station" in msg.lower():
                raise StationUnknown(f"{station}: {msg}")
            raise ProviderError(msg)
        out = []
        for row in payload.get("data", []):
            t = datetime.strptime(row["t"], "%Y-%m-%d %H:%M").replace(tzinfo=UTC)
            v_raw = row.get("v", "")
            flags = row.get("f", "0")
            bad_flag = flags.split(",")[0].strip() == "1"  # first flag: rejected by QC
            out.append((t, None if v_raw == "" or bad_flag else float(v_raw)))
        return out

    # -- CO-OPS monthly mean sea level (CSV) --------------------------------

    def fetch_monthly_mean(self, station: str, tr: TimeRange, datum: str = "MSL") -> FetchResult:
        if not station:
            raise StationUnknown("empty station id")
        tr, notes = validate_time_range(tr, Variable.MONTHLY_MEAN_SEA_LEVEL, self.coverage)
        ep = self.config["endpoints"]["coops"]
        params = {
            "product": "monthly_mean",
            "application": ep.get("application", "oceanquery"),
            "begin_date": tr.start.strftime("%Y%m%d"),
            "end_date": tr.end.strftime("%Y%m%d"),
            "datum": datum,
            "station": station,
            "time_zone": "gmt",
            "units": "metric",
            "format": "csv",
        }
        rec = self.transport.get(ep["base_url"], params)
        timestamps, values = [], []
        text = rec.body.decode("utf-8")
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise GapOnly(f"empty monthly-mean payload for station {station}")
        if "error" in lines[0].lower():
            raise ProviderError(lines[0])
        header = [h.strip().lower() for h in lines[0].split(",")]
        try:
            yi, mi, vi = header.index("year"), header.index("month"), header.index(datum.lower())
        except ValueError as e:
            raise FormatError(f"unexpected monthly-mean CSV header: {lines[0]!r}") from e
        for ln in lines[1:]:
            cells = [c.strip() for c in ln.split(",")]
            t = datetime(int(cells[yi]), int(cells[mi]), 1, tzinfo=UTC)
            if not tr.start <= t <= tr.end:
                continue
            raw = cells[vi]
            timestamps.append(t)
            values.append(float(raw) if raw not in ("", "NaN") else None)
        if not timestamps or all(v is None for v in values):
            raise GapOnly(f"no monthly means for station {station} in range")
        steps = list(notes)
        steps.append(
            f"fetched monthly_mean CSV for station {station} "
            f"({ts_format(tr.start)}..{ts_format(tr.end)}, datum {datum}, metric units)"
        )
        series = Series(
            tuple(timestamps), tuple(values), "m", Variable.MONTHLY_MEAN_SEA_LEVEL, datum
        )
        return FetchResult(series=series, steps=steps, retrieved_at=rec.fetched_at)

    # -- CORA reanalysis subsets (NetCDF) -----------------------------------

    def fetch_cora_series(self, p: Point, tr: TimeRange) -> FetchResult:
        tr, notes = validate_time_range(tr, Variable.CORA_ZETA, self.coverage)
        ep = self.config["endpoints"]["cora"]
        margin = ep.get("subset_margin_deg", 0.5)
        params = {
            "var": "zeta",
            "lat": f"{p.lat:.4f}",
            "lon": f"{p.lon:.4f}",
            "margin": f"{margin}",
            "begin": ts_format(tr.start),
            "end": ts_format(tr.end),
        }
        rec = self.transport.get(ep["base_url"] + "/subset", params)
        try:
            from scipy.io import netcdf_file

            nc = netcdf_file(io.BytesIO(rec.body), "r", mmap=False)
            lats = np.array(nc.variables["lat"][:], dtype=np.float64)
            lons = np.array(nc.variables["lon"][:], dtype=np.float64)
            tvar = nc.variables["time"]
            times = np.array(tvar[:], dtype=np.float64)
            zvar = nc.variables["zeta"]
            fill = float(getattr(zvar, "_FillValue", 9.999e20))
            zeta = np.array(zvar[:], dtype=np.float64)  # (time, node)
            nc.close()
        except (KeyError, ValueError, OSError) as e:
            raise FormatError(f"malformed CORA NetCDF subset: {e}") from e
        if zeta.ndim != 2 or zeta.shape[1] != len(lats):
            raise FormatError(f"unexpected zeta shape {zeta.shape}")
        radius = ep.get("node_search_radius_km", 50.0)
        valid = [bool(np.any(np.abs(zeta[:, i] - fill) > 1e-6)) for i in range(len(lats))]
        nodes = []
        for i, (la, lo) in enumerate(zip(lats, lons)):
            within = analysis.haversine_km(p.lat, p.lon, la, lo) <= radius
            nodes.append((float(la), float(lo), valid[i] and within))
        idx, dist = analysis.nearest_node(p, nodes)
        epoch = datetime(1970, 1, 1, tzinfo=UTC)
        timestamps = tuple(epoch + timedelta(hours=float(h)) for h in times)
        vals = tuple(
            None if abs(v - fill) <= 1e-6 else float(v) for v in zeta[:, idx]
        )
        node_lat, node_lon = float(lats[idx]), float(lons[idx])
        steps = list(notes)
        steps.append(
            f"subset hindcast archive around ({p.lat:.4f}, {p.lon:.4f}) "
            f"for {ts_format(tr.start)}..{ts_format(tr.end)}"
        )
        steps.append(
            f"selected nearest valid model node ({node_lat:.4f}, {node_lon:.4f}) "
            f"at {dist:.2f} km by haversine distance"
        )
        series = Series(timestamps, vals, "m", Variable.CORA_ZETA, datum=None)
        return FetchResult(
            series=series,
            steps=steps,
            retrieved_at=rec.fetched_at,
            extra={"node_lat": node_lat, "node_lon": node_lon, "node_distance_km": dist},
        )

    # -- CRW gridded SST (NetCDF) -------------------------------------------

    def fetch_sst(self, sel, date: datetime) -> FetchResult:
        if isinstance(sel, NamedRegion):
            bbox = self.regions.get(sel.region_key.lower())
            if bbox is None:
                raise StationUnknown(f"unknown named region {sel.region_key!r}")
            region_label = sel.region_key
        elif isinstance(sel, BBox):
            bbox, region_label = sel, "bbox"
        else:
            raise FormatError(f"fetch_sst needs BBox or NamedRegion, got {type(sel).__name__}")
        day = date.replace(hour=0, minute=0, second=0, microsecond=0)
        tr = TimeRange(day, day.replace(hour=23, minute=59), Resolution.DAILY)
        tr, notes = validate_time_range(tr, Variable.SEA_SURFACE_TEMPERATURE, self.coverage)
        ep = self.config["endpoints"]["crw"]
        params = {
            "var": ep.get("sst_var", "analysed_sst"),
            "date": day.strftime("%Y-%m-%d"),
            "lat_min": f"{bbox.lat_min:.3f}",
            "lat_max": f"{bbox.lat_max:.3f}",
            "lon_min": f"{bbox.lon_min:.3f}",
            "lon_max": f"{bbox.lon_max:.3f}",
        }
        rec = self.transport.get(ep["base_url"] + "/subset", params)
        try:
            from scipy.io import netcdf_file

            nc = netcdf_file(io.BytesIO(rec.body), "r", mmap=False)
            lats = np.array(nc.variables["lat"][:], dtype=np.float64)
            lons = np.array(nc.variables["lon"][:], dtype=np.float64)
            svar = nc.variables[ep.get("sst_var", "analysed_sst")]
            fill = float(getattr(svar, "_FillValue", -999.0))
            sst = np.array(svar[:], dtype=np.float64)
            nc.close()
        except (KeyError, ValueError, OSError) as e:
            raise FormatError(f"malformed CRW NetCDF subset: {e}") from e
        if sst.ndim == 3:  # leading time axis of length 1
            sst = sst[0]
        if sst.shape != (len(lats), len(lons)):
            raise FormatError(f"unexpected SST shape {sst.shape}")
        keep_i = [i for i, la in enumerate(lats) if bbox.lat_min <= la <= bbox.lat_max]
        keep_j = [j for j, lo in enumerate(lons) if bbox.lon_min <= lo <= bbox.lon_max]
        if not keep_i or not keep_j:
            raise FormatError("subset contains no grid cells inside bounding box")
        rows = []
        for i in keep_i:
            row = []
            for j in keep_j:
                v = sst[i, j]
                row.append(None if abs(v - fill) <= 1e-6 else float(v))
            rows.append(tuple(row))
        steps = list(notes)
        steps.append(
            f"clipped gridded SST to {region_label} bbox "
            f"[{bbox.lat_min}, {bbox.lat_max}] x [{bbox.lon_min}, {bbox.lon_max}] "
            f"for {day.strftime('%Y-%m-%d')} and masked fill values"
        )
        grid = GridSlice(
            lats=tuple(float(lats[i]) for i in keep_i),
            lons=tuple(float(lons[j]) for j in keep_j),
            values=tuple(rows),
            unit="degC",
            timestamp=day,
            variable=Variable.SEA_SURFACE_TEMPERATURE,
        )
        return FetchResult(
            grid=grid,
            steps=steps,
            retrieved_at=rec.fetched_at,
            extra={"region": region_label, "bbox": bbox.to_dict()},
        )
