"""Spatial feature resolution and raster extraction.

Ten schemes describe how a household's weather series is located: four
anchor points (true household, true EA centerpoint, offset EA centerpoint,
administrative centroid) crossed with simple and bilinear extraction, plus
two zonal means (a circle of uncertainty around the offset EA centerpoint
and the administrative rectangle).
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DuplicateKey,
    EmptyEA,
    EmptyZone,
    MissingContext,
    OutOfDomain,
    SchemaMismatch,
    UnknownHousehold,
)
from .grid_store import RasterStack, cell_of

EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class GeoPoint:
    lon: float
    lat: float

    def __post_init__(self):
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"lon {self.lon} outside [-180, 180]")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"lat {self.lat} outside [-90, 90]")


@dataclass(frozen=True)
class CircleZone:
    """Great-circle disc; membership is haversine distance <= radius_km."""

    center: GeoPoint
    radius_km: float

    def __post_init__(self):
        if self.radius_km <= 0:
            raise ValueError("radius_km must be > 0")

    def contains(self, point: GeoPoint) -> bool:
        return haversine_km(self.center, point) <= self.radius_km


@dataclass(frozen=True)
class RectZone:
    """Axis-aligned lon/lat rectangle with inclusive bounds."""

    west: float
    south: float
    east: float
    north: float

    def __post_init__(self):
        if not (self.east > self.west and self.north > self.south):
            raise ValueError("rectangle requires east > west and north > south")

    def contains(self, point: GeoPoint) -> bool:
        return (
            self.west <= point.lon <= self.east
            and self.south <= point.lat <= self.north
        )

    @property
    def centroid(self) -> GeoPoint:
        return GeoPoint(0.5 * (self.west + self.east), 0.5 * (self.south + self.north))


ZonePolygon = CircleZone | RectZone


class ObfuscationScheme(enum.Enum):
    """The ten location/extraction schemes, numbered in battery order."""

    HH_SIMPLE = 1
    EA_SIMPLE = 2
    MODEA_SIMPLE = 3
    ADMIN_SIMPLE = 4
    HH_BILINEAR = 5
    EA_BILINEAR = 6
    MODEA_BILINEAR = 7
    ADMIN_BILINEAR = 8
    EABUFFER_ZONAL = 9
    ADMINUNIT_ZONAL = 10

    @property
    def method(self) -> str:
        if self.value <= 4:
            return "simple"
        if self.value <= 8:
            return "bilinear"
        return "zonal"

    @property
    def anchor(self) -> str:
        return _ANCHORS[self.value]


_ANCHORS = {
    1: "hh", 2: "ea", 3: "mod_ea", 4: "admin",
    5: "hh", 6: "ea", 7: "mod_ea", 8: "admin",
    9: "ea_buffer", 10: "admin_unit",
}

#: Scheme used for the main battery when only one is requested: the offset
#: EA centerpoint with simple extraction, the anonymized-data default.
DEFAULT_SCHEME = ObfuscationScheme.MODEA_SIMPLE


def scheme_from_value(value) -> ObfuscationScheme:
    """Accept a scheme number (1..10) or a member name, case-insensitive."""
    if isinstance(value, ObfuscationScheme):
        return value
    try:
        return ObfuscationScheme(int(value))
    except (ValueError, TypeError):
        pass
    name = str(value).strip().upper()
    try:
        return ObfuscationScheme[name]
    except KeyError:
        raise ValueError(f"unknown scheme {value!r}") from None


@dataclass(frozen=True)
class FeatureRef:
    """A resolved spatial query: a point plus method, or a zone."""

    method: str  # simple | bilinear | zonal
    point: GeoPoint | None = None
    zone: ZonePolygon | None = None

    def __post_init__(self):
        if self.method in ("simple", "bilinear"):
            if self.point is None or self.zone is not None:
                raise ValueError(f"{self.method} feature needs a point only")
        elif self.method == "zonal":
            if self.zone is None or self.point is not None:
                raise ValueError("zonal feature needs a zone only")
        else:
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class DailySeries:
    """Per-day values for one location query.

    ``values`` is float64 with NaN for missing days; length always equals
    the requested date range.
    """

    start_date: dt.date
    values: np.ndarray
    variable_kind: str
    scheme: ObfuscationScheme | None = None
    product_id: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("series values must be one-dimensional")

    def __len__(self) -> int:
        return int(self.values.shape[0])


# --- spherical geometry ---


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    lon1, lat1 = math.radians(a.lon), math.radians(a.lat)
    lon2, lat2 = math.radians(b.lon), math.radians(b.lat)
    h = (
        math.sin((lat2 - lat1) / 2.0) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2.0) ** 2
    )
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def destination_point(start: GeoPoint, bearing_rad: float, distance_km: float) -> GeoPoint:
    """Spherical destination along a great circle (bearing clockwise from north)."""
    if distance_km == 0.0:
        return start
    lat1 = math.radians(start.lat)
    lon1 = math.radians(start.lon)
    ang = distance_km / EARTH_RADIUS_KM
    lat2 = math.asin(
        math.sin(lat1) * math.cos(ang)
        + math.cos(lat1) * math.sin(ang) * math.cos(bearing_rad)
    )
    lon2 = lon1 + math.atan2(
        math.sin(bearing_rad) * math.sin(ang) * math.cos(lat1),
        math.cos(ang) - math.sin(lat1) * math.sin(lat2),
    )
    lon_deg = math.degrees(lon2)
    if lon_deg > 180.0:
        lon_deg -= 360.0
    elif lon_deg < -180.0:
        lon_deg += 360.0
    return GeoPoint(lon_deg, math.degrees(lat2))


# --- obfuscation ---


@dataclass(frozen=True)
class ObfuscationRadii:
    """Displacement caps: urban 2 km, rural 5 km, 1% of rural draws up to 10 km."""

    urban_km: float = 2.0
    rural_km: float = 5.0
    rural_far_km: float = 10.0
    far_prob: float = 0.01

    def __post_init__(self):
        if self.urban_km < 0 or self.rural_km < 0 or self.rural_far_km < self.rural_km:
            raise ValueError("radii must be >= 0 with rural_far_km >= rural_km")
        if not 0.0 <= self.far_prob <= 1.0:
            raise ValueError("far_prob must lie in [0, 1]")


def obfuscate_ea(
    point: GeoPoint,
    urban: bool,
    rng,
    radii: ObfuscationRadii = ObfuscationRadii(),
) -> GeoPoint:
    """Displace a point by a uniform angle and a bounded random distance.

    Urban points move at most ``urban_km``; rural points at most ``rural_km``
    except a ``far_prob`` fraction that lands in (rural_km, rural_far_km].
    Deterministic given the rng state.
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    angle = rng.uniform(0.0, 2.0 * math.pi)
    if urban:
        dist = rng.uniform(0.0, radii.urban_km)
    elif rng.uniform() < radii.far_prob:
        # distance in (rural_km, rural_far_km]; uniform() lives in [0, 1)
        dist = radii.rural_far_km - rng.uniform() * (radii.rural_far_km - radii.rural_km)
    else:
        dist = rng.uniform(0.0, radii.rural_km)
    return destination_point(point, angle, dist)


def ea_centerpoint(points: list[GeoPoint]) -> GeoPoint:
    """Arithmetic mean of member coordinates."""
    if not points:
        raise EmptyEA("no member households")
    return GeoPoint(
        sum(p.lon for p in points) / len(points),
        sum(p.lat for p in points) / len(points),
    )


# --- survey geography ---


@dataclass(frozen=True)
class Household:
    hh_id: str
    ea_id: str
    admin_id: str
    point: GeoPoint
    urban: bool


@dataclass(frozen=True)
class AdminUnit:
    admin_id: str
    rect: RectZone
    centroid: GeoPoint


@dataclass
class GeoContext:
    """Immutable survey geography shared by every extraction.

    Modified EA centerpoints are drawn once per EA (seeded by the offset
    seed and the EA id) and stay fixed across waves.
    """

    households: dict[str, Household]
    ea_members: dict[str, list[str]]
    admin_units: dict[str, AdminUnit]
    buffer_radius_km: float
    offset_seed: int
    radii: ObfuscationRadii = ObfuscationRadii()
    ea_centers: dict[str, GeoPoint] = field(default_factory=dict)
    ea_modified: dict[str, GeoPoint] = field(default_factory=dict)
    ea_urban: dict[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        if self.buffer_radius_km <= 0:
            raise ValueError("buffer_radius_km must be > 0")
        for ea_id, members in self.ea_members.items():
            pts = [self.households[h].point for h in members]
            center = ea_centerpoint(pts)
            self.ea_centers[ea_id] = center
            # majority urban flag; ties count as urban
            n_urban = sum(self.households[h].urban for h in members)
            urban = n_urban * 2 >= len(members)
            self.ea_urban[ea_id] = urban
            rng = np.random.default_rng([self.offset_seed, *ea_id.encode("utf-8")])
            self.ea_modified[ea_id] = obfuscate_ea(center, urban, rng, self.radii)


def _read_csv_rows(path, required: tuple[str, ...]) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaMismatch(f"{path}: missing columns {missing}")
        return list(reader)


def load_geo_context(
    households_csv,
    admin_csv,
    buffer_radius_km: float,
    offset_seed: int,
    radii: ObfuscationRadii = ObfuscationRadii(),
) -> GeoContext:
    """Build a GeoContext from the households/admin CSV pair."""
    households: dict[str, Household] = {}
    ea_members: dict[str, list[str]] = {}
    rows = _read_csv_rows(
        households_csv, ("hh_id", "ea_id", "admin_id", "lon", "lat", "urban")
    )
    for row in rows:
        hh_id = row["hh_id"]
        if hh_id in households:
            raise DuplicateKey(f"household {hh_id!r} listed twice")
        hh = Household(
            hh_id=hh_id,
            ea_id=row["ea_id"],
            admin_id=row["admin_id"],
            point=GeoPoint(float(row["lon"]), float(row["lat"])),
            urban=row["urban"].strip() in ("1", "true", "True"),
        )
        households[hh_id] = hh
        ea_members.setdefault(hh.ea_id, []).append(hh_id)

    admin_units: dict[str, AdminUnit] = {}
    for row in _read_csv_rows(
        admin_csv,
        ("admin_id", "west", "south", "east", "north", "centroid_lon", "centroid_lat"),
    ):
        admin_id = row["admin_id"]
        if admin_id in admin_units:
            raise DuplicateKey(f"admin unit {admin_id!r} listed twice")
        admin_units[admin_id] = AdminUnit(
            admin_id=admin_id,
            rect=RectZone(
                float(row["west"]), float(row["south"]),
                float(row["east"]), float(row["north"]),
            ),
            centroid=GeoPoint(float(row["centroid_lon"]), float(row["centroid_lat"])),
        )

    return GeoContext(
        households=households,
        ea_members=ea_members,
        admin_units=admin_units,
        buffer_radius_km=buffer_radius_km,
        offset_seed=offset_seed,
        radii=radii,
    )


def resolve_feature(
    scheme: ObfuscationScheme, hh_id: str, ctx: GeoContext
) -> FeatureRef:
    """Map a household and scheme to the spatial feature to extract at."""
    hh = ctx.households.get(hh_id)
    if hh is None:
        raise UnknownHousehold(f"household {hh_id!r} not in context")
    anchor = scheme.anchor
    if anchor == "hh":
        return FeatureRef(method=scheme.method, point=hh.point)
    if anchor == "ea":
        return FeatureRef(method=scheme.method, point=ctx.ea_centers[hh.ea_id])
    if anchor == "mod_ea":
        return FeatureRef(method=scheme.method, point=ctx.ea_modified[hh.ea_id])
    if anchor == "admin":
        unit = ctx.admin_units.get(hh.admin_id)
        if unit is None:
            raise MissingContext(f"no admin unit {hh.admin_id!r} for {hh_id!r}")
        return FeatureRef(method=scheme.method, point=unit.centroid)
    if anchor == "ea_buffer":
        return FeatureRef(
            method="zonal",
            zone=CircleZone(ctx.ea_modified[hh.ea_id], ctx.buffer_radius_km),
        )
    if anchor == "admin_unit":
        unit = ctx.admin_units.get(hh.admin_id)
        if unit is None:
            raise MissingContext(f"no admin unit {hh.admin_id!r} for {hh_id!r}")
        return FeatureRef(method="zonal", zone=unit.rect)
    raise AssertionError(f"unhandled anchor {anchor!r}")


# --- extraction ---


def _day_span(stack: RasterStack, start: dt.date, end: dt.date) -> tuple[int, int]:
    if end < start:
        raise ValueError("end date before start date")
    return stack.day_index(start), stack.day_index(end)


def extract_simple(
    stack: RasterStack, point, start: dt.date, end: dt.date
) -> DailySeries:
    """Per-day value of the cell containing the point."""
    i0, i1 = _day_span(stack, start, end)
    row, col = cell_of(stack, point)
    vals = stack.values[i0 : i1 + 1, row, col].astype(np.float64)
    return DailySeries(
        start_date=start,
        values=vals,
        variable_kind=stack.variable_kind,
        product_id=stack.product_id,
    )


def _bilinear_axis(coord: float, origin: float, step: float, n: int, southward: bool):
    """Lower index and weight along one axis, clamped near the boundary."""
    g = ((origin - coord) / step if southward else (coord - origin) / step) - 0.5
    if n == 1:
        return 0, 0, 0.0
    i0 = min(max(math.floor(g), 0), n - 2)
    w = min(max(g - i0, 0.0), 1.0)
    return i0, i0 + 1, w


def extract_bilinear(
    stack: RasterStack, point, start: dt.date, end: dt.date
) -> DailySeries:
    """Separable bilinear interpolation among the 4 surrounding cell centers.

    Points within half a cell of the outer boundary take the edge-cell
    value along that axis; points outside the grid raise OutOfDomain.
    """
    i0, i1 = _day_span(stack, start, end)
    cell_of(stack, point)  # domain check, same rule as simple extraction
    lon = float(point.lon) if hasattr(point, "lon") else float(point[0])
    lat = float(point.lat) if hasattr(point, "lat") else float(point[1])
    c0, c1, wx = _bilinear_axis(lon, stack.origin_lon, stack.cell_size_lon, stack.n_cols, False)
    r0, r1, wy = _bilinear_axis(lat, stack.origin_lat, stack.cell_size_lat, stack.n_rows, True)
    corners = stack.values[i0 : i1 + 1][:, [r0, r0, r1, r1], [c0, c1, c0, c1]]
    weights = np.array(
        [(1 - wy) * (1 - wx), (1 - wy) * wx, wy * (1 - wx), wy * wx], dtype=np.float64
    )
    used = weights > 0.0
    vals = corners[:, used].astype(np.float64) @ weights[used]
    return DailySeries(
        start_date=start,
        values=vals,
        variable_kind=stack.variable_kind,
        product_id=stack.product_id,
    )


def _zone_mask(stack: RasterStack, zone: ZonePolygon) -> np.ndarray:
    lons = stack.origin_lon + (np.arange(stack.n_cols) + 0.5) * stack.cell_size_lon
    lats = stack.origin_lat - (np.arange(stack.n_rows) + 0.5) * stack.cell_size_lat
    lon_g, lat_g = np.meshgrid(lons, lats)
    if isinstance(zone, RectZone):
        return (
            (lon_g >= zone.west)
            & (lon_g <= zone.east)
            & (lat_g >= zone.south)
            & (lat_g <= zone.north)
        )
    lat1 = math.radians(zone.center.lat)
    lon1 = math.radians(zone.center.lon)
    lat2 = np.radians(lat_g)
    lon2 = np.radians(lon_g)
    h = (
        np.sin((lat2 - lat1) / 2.0) ** 2
        + math.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2
    )
    dist = 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))
    return dist <= zone.radius_km


def extract_zonal(
    stack: RasterStack, zone: ZonePolygon, start: dt.date, end: dt.date
) -> DailySeries:
    """Unweighted mean over cells whose centers fall inside the zone."""
    i0, i1 = _day_span(stack, start, end)
    mask = _zone_mask(stack, zone)
    if not mask.any():
        raise EmptyZone("no cell center inside zone")
    vals = stack.values[i0 : i1 + 1][:, mask].astype(np.float64).mean(axis=1)
    return DailySeries(
        start_date=start,
        values=vals,
        variable_kind=stack.variable_kind,
        product_id=stack.product_id,
    )


def extract_feature(
    stack: RasterStack,
    feature: FeatureRef,
    start: dt.date,
    end: dt.date,
    scheme: ObfuscationScheme | None = None,
) -> DailySeries:
    """Dispatch on the feature's method; tags the series with the scheme."""
    if feature.method == "simple":
        series = extract_simple(stack, feature.point, start, end)
    elif feature.method == "bilinear":
        series = extract_bilinear(stack, feature.point, start, end)
    else:
        series = extract_zonal(stack, feature.zone, start, end)
    series.scheme = scheme
    return series
