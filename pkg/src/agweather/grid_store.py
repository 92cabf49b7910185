"""Daily gridded weather storage.

A :class:`RasterStack` holds one variable (rainfall or temperature) on a
regular lon/lat grid with one layer per day.  Stacks are serialized in the
AGWX binary format (little-endian)::

    magic "AGWX" | version u16=1 | variable_kind u8 | product_id (u8 len + utf8)
    | origin_lon f64 | origin_lat f64 | cell_size_lon f64 | cell_size_lat f64
    | n_rows u32 | n_cols u32 | start_date i32 (days since 1970-01-01)
    | n_days u32 | payload f32 * n_days*n_rows*n_cols (day-major, row-major)

Row 0 is the northernmost row.  The center of cell (r, c) sits at
``lon = origin_lon + (c+0.5)*cell_size_lon`` and
``lat = origin_lat - (r+0.5)*cell_size_lat``.  Missing values are NaN.
"""

from __future__ import annotations

import datetime as dt
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.special import ndtr
from scipy.stats import gamma as gamma_dist

from .errors import (
    BadMagic,
    DateOutOfRange,
    IndexOutOfRange,
    InvalidHeader,
    OutOfDomain,
    TruncatedPayload,
)

RAIN = "rainfall_mm_per_day"
TEMP_MEAN = "temp_mean_c"
TEMP_MAX = "temp_max_c"

VARIABLE_KINDS = (RAIN, TEMP_MEAN, TEMP_MAX)

_MAGIC = b"AGWX"
_VERSION = 1
_EPOCH = dt.date(1970, 1, 1)
_KIND_CODES = {RAIN: 0, TEMP_MEAN: 1, TEMP_MAX: 2}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}

#: Earliest permitted start date for blinded stacks.
BLINDING_EPOCH = dt.date(1983, 1, 1)

#: Rough kilometres per degree used to convert correlation lengths to cells.
KM_PER_DEGREE = 111.0


def _lonlat(point) -> tuple[float, float]:
    """Accept a GeoPoint-like object (``.lon``/``.lat``) or a (lon, lat) pair."""
    if hasattr(point, "lon"):
        return float(point.lon), float(point.lat)
    lon, lat = point
    return float(lon), float(lat)


@dataclass(eq=False)
class RasterStack:
    """One variable on a daily regular grid.

    Parameters
    ----------
    variable_kind : str
        One of ``rainfall_mm_per_day``, ``temp_mean_c``, ``temp_max_c``.
    product_id : str
        Opaque product label (at most 255 UTF-8 bytes).
    origin_lon, origin_lat : float
        Decimal degrees of the grid's NW corner.
    cell_size_lon, cell_size_lat : float
        Positive cell sizes in degrees; latitude decreases southward.
    n_rows, n_cols : int
        Grid dimensions.
    start_date : datetime.date
        Calendar date of day 0.
    values : numpy.ndarray
        Shape ``(n_days, n_rows, n_cols)`` float32 (a flat array of that
        length is reshaped).  NaN marks missing observations.

    A loaded stack is immutable by convention and may be read concurrently.
    """

    variable_kind: str
    product_id: str
    origin_lon: float
    origin_lat: float
    cell_size_lon: float
    cell_size_lat: float
    n_rows: int
    n_cols: int
    start_date: dt.date
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.variable_kind not in _KIND_CODES:
            raise ValueError(f"unknown variable_kind {self.variable_kind!r}")
        if len(self.product_id.encode("utf-8")) > 255:
            raise ValueError("product_id longer than 255 bytes")
        if self.cell_size_lon <= 0 or self.cell_size_lat <= 0:
            raise ValueError("cell sizes must be positive")
        if self.n_rows <= 0 or self.n_cols <= 0:
            raise ValueError("grid dimensions must be positive")
        vals = np.asarray(self.values, dtype=np.float32)
        if vals.ndim == 1:
            if vals.size % (self.n_rows * self.n_cols) != 0:
                raise ValueError("flat values length not a multiple of grid size")
            vals = vals.reshape(-1, self.n_rows, self.n_cols)
        if vals.ndim != 3 or vals.shape[1:] != (self.n_rows, self.n_cols):
            raise ValueError("values must have shape (n_days, n_rows, n_cols)")
        if vals.shape[0] == 0:
            raise ValueError("stack must hold at least one day")
        if self.variable_kind == RAIN:
            finite = vals[~np.isnan(vals)]
            if finite.size and float(finite.min()) < 0.0:
                raise ValueError("rainfall values must be >= 0 or NaN")
        self.values = vals

    @property
    def n_days(self) -> int:
        return int(self.values.shape[0])

    @property
    def end_date(self) -> dt.date:
        """Last covered date (inclusive)."""
        return self.start_date + dt.timedelta(days=self.n_days - 1)

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        """(lon, lat) of the center of cell (row, col)."""
        lon = self.origin_lon + (col + 0.5) * self.cell_size_lon
        lat = self.origin_lat - (row + 0.5) * self.cell_size_lat
        return lon, lat

    def day_index(self, date: dt.date) -> int:
        idx = (date - self.start_date).days
        if idx < 0 or idx >= self.n_days:
            raise DateOutOfRange(
                f"{date} outside [{self.start_date}, {self.end_date}]"
            )
        return idx

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterStack):
            return NotImplemented
        return (
            self.variable_kind == other.variable_kind
            and self.product_id == other.product_id
            and self.origin_lon == other.origin_lon
            and self.origin_lat == other.origin_lat
            and self.cell_size_lon == other.cell_size_lon
            and self.cell_size_lat == other.cell_size_lat
            and self.n_rows == other.n_rows
            and self.n_cols == other.n_cols
            and self.start_date == other.start_date
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


@dataclass(frozen=True)
class ProductSpec:
    """Static description of a weather product (daily step only)."""

    product_id: str
    variable_kind: str
    cell_size_lon: float
    cell_size_lat: float
    units: str = "mm"

    def __post_init__(self):
        if self.variable_kind not in VARIABLE_KINDS:
            raise ValueError(f"unknown variable_kind {self.variable_kind!r}")
        if self.cell_size_lon <= 0 or self.cell_size_lat <= 0:
            raise ValueError("cell sizes must be positive")


@dataclass(frozen=True)
class SynthWeatherConfig:
    """Parameters for the synthetic weather generator.

    Rainfall is a seasonal wet-day Bernoulli crossed with gamma amounts,
    driven by one spatially smoothed Gaussian noise field per day so that
    occurrence and amounts are both spatially correlated.  Temperature is an
    annual sinusoid plus smoothed noise.
    """

    variable_kind: str
    product_id: str
    origin_lon: float
    origin_lat: float
    cell_size_lon: float
    cell_size_lat: float
    n_rows: int
    n_cols: int
    start_date: dt.date
    n_days: int
    # rainfall parameters
    wet_prob_base: float = 0.40
    wet_prob_amplitude: float = 0.30
    wet_prob_peak_doy: int = 200
    gamma_shape: float = 0.9
    gamma_scale_mm: float = 9.0
    # temperature parameters
    temp_mean_c: float = 24.0
    temp_amplitude_c: float = 3.0
    temp_noise_sd_c: float = 1.5
    temp_peak_doy: int = 75
    # shared
    correlation_km: float = 30.0
    seed: int = 0
    blinded: bool = False

    def __post_init__(self):
        if self.variable_kind not in VARIABLE_KINDS:
            raise ValueError(f"unknown variable_kind {self.variable_kind!r}")
        if self.correlation_km <= 0:
            raise ValueError("correlation_km must be > 0")
        if not 0.0 <= self.wet_prob_base <= 1.0:
            raise ValueError("wet_prob_base must lie in [0, 1]")
        if self.wet_prob_amplitude < 0:
            raise ValueError("wet_prob_amplitude must be >= 0")
        if self.gamma_shape <= 0 or self.gamma_scale_mm <= 0:
            raise ValueError("gamma parameters must be positive")
        if self.temp_noise_sd_c < 0:
            raise ValueError("temp_noise_sd_c must be >= 0")
        if self.n_days <= 0 or self.n_rows <= 0 or self.n_cols <= 0:
            raise ValueError("dimensions must be positive")
        if self.blinded and self.start_date < BLINDING_EPOCH:
            raise ValueError(f"blinded stacks must start on/after {BLINDING_EPOCH}")


# --- AGWX serialization ---

_HEAD_FIXED = struct.Struct("<4sHB")
_HEAD_GEO = struct.Struct("<ddddIIiI")


def save_raster_stack(stack: RasterStack, path) -> None:
    """Write ``stack`` to ``path`` in AGWX format.

    The written file round-trips: loading it yields a stack equal to
    ``stack`` field for field, and re-saving reproduces the bytes.
    """
    pid = stack.product_id.encode("utf-8")
    header = _HEAD_FIXED.pack(_MAGIC, _VERSION, _KIND_CODES[stack.variable_kind])
    header += struct.pack("<B", len(pid)) + pid
    header += _HEAD_GEO.pack(
        stack.origin_lon,
        stack.origin_lat,
        stack.cell_size_lon,
        stack.cell_size_lat,
        stack.n_rows,
        stack.n_cols,
        (stack.start_date - _EPOCH).days,
        stack.n_days,
    )
    payload = np.ascontiguousarray(stack.values, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_raster_stack(path) -> RasterStack:
    """Read an AGWX file.

    Raises
    ------
    BadMagic
        File does not begin with ``AGWX``.
    InvalidHeader
        Structurally invalid header (bad version/kind/dims/date) or
        trailing bytes after the declared payload.
    TruncatedPayload
        Declared dimensions exceed the available payload.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEAD_FIXED.size or blob[:4] != _MAGIC:
        raise BadMagic(f"{path}: not an AGWX file")
    _, version, kind_code = _HEAD_FIXED.unpack_from(blob, 0)
    if version != _VERSION:
        raise InvalidHeader(f"unsupported AGWX version {version}")
    if kind_code not in _CODE_KINDS:
        raise InvalidHeader(f"unknown variable kind code {kind_code}")
    off = _HEAD_FIXED.size
    if len(blob) < off + 1:
        raise TruncatedPayload("header cut short before product id")
    pid_len = blob[off]
    off += 1
    if len(blob) < off + pid_len + _HEAD_GEO.size:
        raise TruncatedPayload("header cut short")
    product_id = blob[off : off + pid_len].decode("utf-8")
    off += pid_len
    (
        origin_lon,
        origin_lat,
        cell_lon,
        cell_lat,
        n_rows,
        n_cols,
        epoch_days,
        n_days,
    ) = _HEAD_GEO.unpack_from(blob, off)
    off += _HEAD_GEO.size
    if n_rows <= 0 or n_cols <= 0 or n_days <= 0:
        raise InvalidHeader("non-positive grid dimensions")
    if cell_lon <= 0 or cell_lat <= 0 or not (math.isfinite(cell_lon) and math.isfinite(cell_lat)):
        raise InvalidHeader("invalid cell sizes")
    try:
        start_date = _EPOCH + dt.timedelta(days=epoch_days)
    except OverflowError as exc:
        raise InvalidHeader(f"invalid start date offset {epoch_days}") from exc
    expected = n_days * n_rows * n_cols * 4
    if len(blob) - off < expected:
        raise TruncatedPayload(
            f"payload holds {len(blob) - off} bytes, header declares {expected}"
        )
    if len(blob) - off > expected:
        raise InvalidHeader(f"{len(blob) - off - expected} trailing bytes")
    values = np.frombuffer(blob, dtype="<f4", count=n_days * n_rows * n_cols, offset=off)
    values = values.reshape(n_days, n_rows, n_cols).copy()
    try:
        return RasterStack(
            variable_kind=_CODE_KINDS[kind_code],
            product_id=product_id,
            origin_lon=origin_lon,
            origin_lat=origin_lat,
            cell_size_lon=cell_lon,
            cell_size_lat=cell_lat,
            n_rows=n_rows,
            n_cols=n_cols,
            start_date=start_date,
            values=values,
        )
    except ValueError as exc:
        raise InvalidHeader(str(exc)) from exc


def check_blinded(stack: RasterStack) -> None:
    """Raise InvalidHeader unless the stack satisfies the blinding truncation."""
    if stack.start_date < BLINDING_EPOCH:
        raise InvalidHeader(
            f"blinded stack starts {stack.start_date}, before {BLINDING_EPOCH}"
        )


# --- georeferencing ---

def cell_of(stack: RasterStack, point) -> tuple[int, int]:
    """Index of the cell containing ``point``.

    Floor convention: a point exactly on an interior boundary belongs to the
    cell to the east/south.  Points on the far east/south outer edge are out
    of domain.
    """
    lon, lat = _lonlat(point)
    col = math.floor((lon - stack.origin_lon) / stack.cell_size_lon)
    row = math.floor((stack.origin_lat - lat) / stack.cell_size_lat)
    if not (0 <= col < stack.n_cols) or not (0 <= row < stack.n_rows):
        raise OutOfDomain(
            f"point ({lon}, {lat}) outside grid of {stack.n_rows}x{stack.n_cols} "
            f"cells at origin ({stack.origin_lon}, {stack.origin_lat})"
        )
    return row, col


def value_at(stack: RasterStack, date: dt.date, row: int, col: int) -> float:
    """Stored value (or NaN) for one day and cell."""
    day = stack.day_index(date)
    if not (0 <= row < stack.n_rows) or not (0 <= col < stack.n_cols):
        raise IndexOutOfRange(f"(row={row}, col={col}) outside grid")
    return float(stack.values[day, row, col])


def _doy(start_date: dt.date, n_days: int) -> np.ndarray:
    """Day-of-year (1-based) for each layer."""
    start_ord = start_date.toordinal()
    out = np.empty(n_days, dtype=np.float64)
    for i in range(n_days):
        d = dt.date.fromordinal(start_ord + i)
        out[i] = d.timetuple().tm_yday
    return out


def _smoothed_noise(cfg: SynthWeatherConfig, rng: np.random.Generator) -> np.ndarray:
    """Standard-normal-ish field with the configured spatial correlation."""
    noise = rng.standard_normal((cfg.n_days, cfg.n_rows, cfg.n_cols))
    cell_km = KM_PER_DEGREE * 0.5 * (cfg.cell_size_lon + cfg.cell_size_lat)
    sigma = cfg.correlation_km / cell_km
    smooth = gaussian_filter(noise, sigma=(0.0, sigma, sigma), mode="nearest")
    sd = float(smooth.std())
    if sd > 1e-12:
        smooth = (smooth - float(smooth.mean())) / sd
    else:
        smooth = noise
    return smooth


def synth_weather(cfg: SynthWeatherConfig) -> RasterStack:
    """Generate a synthetic daily stack; deterministic for a fixed seed."""
    rng = np.random.default_rng(cfg.seed)
    z = _smoothed_noise(cfg, rng)
    doy = _doy(cfg.start_date, cfg.n_days)

    if cfg.variable_kind == RAIN:
        phase = 2.0 * np.pi * (doy - cfg.wet_prob_peak_doy) / 365.25
        p_wet = np.clip(
            cfg.wet_prob_base + cfg.wet_prob_amplitude * np.cos(phase), 0.0, 1.0
        )
        u = ndtr(z)
        thresh = (1.0 - p_wet)[:, None, None]
        excess = np.clip((u - thresh) / np.maximum(p_wet[:, None, None], 1e-12), 0.0, 1.0 - 1e-12)
        amounts = gamma_dist.ppf(excess, cfg.gamma_shape, scale=cfg.gamma_scale_mm)
        values = np.where(u > thresh, amounts, 0.0)
    else:
        phase = 2.0 * np.pi * (doy - cfg.temp_peak_doy) / 365.25
        seasonal = cfg.temp_mean_c + cfg.temp_amplitude_c * np.cos(phase)
        values = seasonal[:, None, None] + cfg.temp_noise_sd_c * z

    return RasterStack(
        variable_kind=cfg.variable_kind,
        product_id=cfg.product_id,
        origin_lon=cfg.origin_lon,
        origin_lat=cfg.origin_lat,
        cell_size_lon=cfg.cell_size_lon,
        cell_size_lat=cfg.cell_size_lat,
        n_rows=cfg.n_rows,
        n_cols=cfg.n_cols,
        start_date=cfg.start_date,
        values=values.astype(np.float32),
    )
