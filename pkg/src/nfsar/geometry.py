"""Imaging geometry and spatial-variant PSF synthesis for near-field rail SAR.

Coordinate conventions
----------------------
The scanning rail lies along the azimuth axis with its center at the
coordinate origin.  A target at (azimuth, range) has slant range
R = hypot(azimuth, range) and observation angle theta = arctan(azimuth /
range), measured from boresight and positive toward positive azimuth.
Images are sampled on a regular grid; array axis 0 is azimuth, axis 1 is
range.

The degradation point-spread function of a target is a 2D sinc pattern
whose range lobe lies along the target's line of sight and whose azimuth
lobe lies across it.  The azimuth lobe width grows linearly with slant
range, so the PSF is spatial-variant in both orientation and scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT_M_S = 299_792_458.0


@dataclass(frozen=True)
class GridSpec:
    """Regular image sampling grid. Cell [0, 0] sits at the origin position."""

    n_azimuth: int
    n_range: int
    spacing_azimuth_m: float
    spacing_range_m: float
    origin_azimuth_m: float
    origin_range_m: float

    def __post_init__(self) -> None:
        if self.n_azimuth < 1 or self.n_range < 1:
            raise ValueError("grid dimensions must be >= 1")
        if self.spacing_azimuth_m <= 0.0 or self.spacing_range_m <= 0.0:
            raise ValueError("grid spacings must be > 0")
        for name in ("spacing_azimuth_m", "spacing_range_m",
                     "origin_azimuth_m", "origin_range_m"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_azimuth, self.n_range)

    def azimuth_coords(self) -> np.ndarray:
        return self.origin_azimuth_m + self.spacing_azimuth_m * np.arange(self.n_azimuth)

    def range_coords(self) -> np.ndarray:
        return self.origin_range_m + self.spacing_range_m * np.arange(self.n_range)

    def cell_position(self, i: int, j: int) -> tuple[float, float]:
        """(azimuth_m, range_m) of grid cell [i, j]."""
        return (self.origin_azimuth_m + i * self.spacing_azimuth_m,
                self.origin_range_m + j * self.spacing_range_m)

    def contains(self, azimuth_m: float, range_m: float) -> bool:
        """True when the position snaps to some grid cell (within half a cell)."""
        fi = (azimuth_m - self.origin_azimuth_m) / self.spacing_azimuth_m
        fj = (range_m - self.origin_range_m) / self.spacing_range_m
        return (-0.5 <= fi <= self.n_azimuth - 0.5) and (-0.5 <= fj <= self.n_range - 0.5)

    def nearest_cell(self, azimuth_m: float, range_m: float) -> tuple[int, int]:
        """Indices of the grid cell nearest the position; raises if off-grid."""
        if not self.contains(azimuth_m, range_m):
            raise ValueError(
                f"position (azimuth={azimuth_m} m, range={range_m} m) is outside the grid")
        fi = (azimuth_m - self.origin_azimuth_m) / self.spacing_azimuth_m
        fj = (range_m - self.origin_range_m) / self.spacing_range_m
        i = min(int(np.rint(fi)), self.n_azimuth - 1)
        j = min(int(np.rint(fj)), self.n_range - 1)
        return max(i, 0), max(j, 0)

    def center_position(self) -> tuple[float, float]:
        """(azimuth_m, range_m) of the geometric grid center."""
        return (self.origin_azimuth_m + 0.5 * (self.n_azimuth - 1) * self.spacing_azimuth_m,
                self.origin_range_m + 0.5 * (self.n_range - 1) * self.spacing_range_m)


@dataclass(frozen=True)
class ImagingGeometry:
    """Radar, rail, and image-grid parameters of one imaging run.

    The rail center is the coordinate origin; all grid cells must lie at
    strictly positive range so every cell has slant range R > 0.
    """

    center_frequency_hz: float
    transmit_bandwidth_hz: float
    rail_length_m: float
    grid: GridSpec

    def __post_init__(self) -> None:
        if self.center_frequency_hz <= 0.0:
            raise ValueError("center_frequency_hz must be > 0")
        if self.transmit_bandwidth_hz <= 0.0:
            raise ValueError("transmit_bandwidth_hz must be > 0")
        if self.rail_length_m <= 0.0:
            raise ValueError("rail_length_m must be > 0")
        if self.grid.origin_range_m <= 0.0:
            raise ValueError("grid must lie at strictly positive range (R > 0 per cell)")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT_M_S / self.center_frequency_hz

    def slant_range(self, azimuth_m: float, range_m: float) -> float:
        return math.hypot(azimuth_m, range_m)

    def min_slant_range(self) -> float:
        """Smallest slant range over the grid."""
        g = self.grid
        az_lo = g.origin_azimuth_m
        az_hi = g.origin_azimuth_m + (g.n_azimuth - 1) * g.spacing_azimuth_m
        nearest_az = min(max(0.0, az_lo), az_hi) if az_lo <= az_hi else 0.0
        return math.hypot(nearest_az, g.origin_range_m)

    def max_slant_range(self) -> float:
        """Largest slant range over the grid (attained at a corner)."""
        g = self.grid
        az_lo = g.origin_azimuth_m
        az_hi = g.origin_azimuth_m + (g.n_azimuth - 1) * g.spacing_azimuth_m
        rg_hi = g.origin_range_m + (g.n_range - 1) * g.spacing_range_m
        return math.hypot(max(abs(az_lo), abs(az_hi)), rg_hi)


def resolutions(geometry: ImagingGeometry, slant_range_m: float) -> tuple[float, float]:
    """(range, azimuth) resolution in meters at a given slant range.

    Range resolution is c / (2 B); azimuth resolution is lambda R / (2 L)
    and therefore grows linearly with slant range.
    """
    if not math.isfinite(slant_range_m) or slant_range_m <= 0.0:
        raise ValueError(f"slant range must be finite and > 0, got {slant_range_m}")
    rho_range = SPEED_OF_LIGHT_M_S / (2.0 * geometry.transmit_bandwidth_hz)
    rho_azimuth = geometry.wavelength_m * slant_range_m / (2.0 * geometry.rail_length_m)
    return rho_range, rho_azimuth


def observation_angle(geometry: ImagingGeometry,
                      target_azimuth_m: float, target_range_m: float) -> float:
    """Angle of the target's line of sight from boresight, in (-pi/2, pi/2)."""
    if not (math.isfinite(target_azimuth_m) and math.isfinite(target_range_m)):
        raise ValueError("target position must be finite")
    if target_range_m <= 0.0:
        raise ValueError(f"target range must be > 0, got {target_range_m}")
    return math.atan2(target_azimuth_m, target_range_m)


def rotated_sinc(d_azimuth_m, d_range_m, angle_rad: float,
                 rho_range_m: float, rho_azimuth_m: float):
    """Unit-peak 2D sinc pattern rotated to a given observation angle.

    The range lobe (first null at rho_range_m) lies along the line of
    sight, the azimuth lobe (first null at rho_azimuth_m) across it.
    Accepts scalar or broadcastable array offsets.
    """
    sin_t = math.sin(angle_rad)
    cos_t = math.cos(angle_rad)
    along = d_azimuth_m * sin_t + d_range_m * cos_t
    across = d_azimuth_m * cos_t - d_range_m * sin_t
    return np.sinc(along / rho_range_m) * np.sinc(across / rho_azimuth_m)


@dataclass(frozen=True)
class PsfTruncation:
    """Patch truncation rule: envelope floor in dB, or a fixed odd patch size."""

    min_level_db: float = -40.0
    fixed_patch_cells: int | None = None

    def __post_init__(self) -> None:
        if self.fixed_patch_cells is not None:
            if self.fixed_patch_cells < 3 or self.fixed_patch_cells % 2 == 0:
                raise ValueError("fixed_patch_cells must be odd and >= 3")
        elif self.min_level_db >= 0.0:
            raise ValueError("min_level_db must be < 0")

    def tail_argument(self) -> float:
        """Sinc argument where the 1/(pi t) envelope hits min_level_db.

        Never truncates inside the mainlobe.
        """
        amplitude = 10.0 ** (self.min_level_db / 20.0)
        return max(1.0, 1.0 / (math.pi * amplitude))


@dataclass(frozen=True, eq=False)
class PsfPatch:
    """Truncated PSF sampled on the image grid, peak-normalized at the center.

    samples has odd dimensions (2*h+1 per axis) with the unit peak at the
    central sample; axis 0 is azimuth, axis 1 is range.
    """

    samples: np.ndarray
    center_slant_range_m: float
    observation_angle_rad: float
    resolution_range_m: float
    resolution_azimuth_m: float
    truncation_radius_cells: tuple[int, int]
    clamped: bool = False

    def __post_init__(self) -> None:
        n_az, n_rg = self.samples.shape
        if n_az % 2 == 0 or n_rg % 2 == 0:
            raise ValueError("patch dimensions must be odd")
        h_az, h_rg = self.truncation_radius_cells
        if (2 * h_az + 1, 2 * h_rg + 1) != (n_az, n_rg):
            raise ValueError("truncation_radius_cells inconsistent with samples shape")

    @property
    def half_azimuth(self) -> int:
        return self.truncation_radius_cells[0]

    @property
    def half_range(self) -> int:
        return self.truncation_radius_cells[1]

    def norm_squared(self) -> float:
        return float(np.sum(self.samples * self.samples))


def synthesize_psf_polar(geometry: ImagingGeometry, slant_range_m: float,
                         angle_rad: float,
                         truncation: PsfTruncation | None = None) -> PsfPatch:
    """PSF patch for a target at the given slant range and observation angle.

    The patch is the closed-form rotated sinc sampled at grid spacing; it is
    equivalently the inverse Fourier transform of the rotated rectangular
    spectral support with extents 1/rho_range by 1/rho_azimuth.
    """
    if truncation is None:
        truncation = PsfTruncation()
    if not (math.isfinite(slant_range_m) and math.isfinite(angle_rad)):
        raise ValueError("slant range and angle must be finite")
    rho_r, rho_a = resolutions(geometry, slant_range_m)
    grid = geometry.grid

    if truncation.fixed_patch_cells is not None:
        h_az = h_rg = (truncation.fixed_patch_cells - 1) // 2
    else:
        tail = truncation.tail_argument()
        half_along_m = tail * rho_r
        half_across_m = tail * rho_a
        abs_sin = abs(math.sin(angle_rad))
        abs_cos = abs(math.cos(angle_rad))
        # Bounding box of the rotated truncation rectangle, in grid cells.
        h_az = math.ceil((half_along_m * abs_sin + half_across_m * abs_cos)
                         / grid.spacing_azimuth_m)
        h_rg = math.ceil((half_along_m * abs_cos + half_across_m * abs_sin)
                         / grid.spacing_range_m)
    h_az = max(h_az, 1)
    h_rg = max(h_rg, 1)

    max_h_az = max(1, (grid.n_azimuth - 1) // 2)
    max_h_rg = max(1, (grid.n_range - 1) // 2)
    clamped = h_az > max_h_az or h_rg > max_h_rg
    h_az = min(h_az, max_h_az)
    h_rg = min(h_rg, max_h_rg)

    d_az = (np.arange(2 * h_az + 1) - h_az)[:, None] * grid.spacing_azimuth_m
    d_rg = (np.arange(2 * h_rg + 1) - h_rg)[None, :] * grid.spacing_range_m
    samples = rotated_sinc(d_az, d_rg, angle_rad, rho_r, rho_a)
    return PsfPatch(samples=samples,
                    center_slant_range_m=slant_range_m,
                    observation_angle_rad=angle_rad,
                    resolution_range_m=rho_r,
                    resolution_azimuth_m=rho_a,
                    truncation_radius_cells=(h_az, h_rg),
                    clamped=clamped)


def synthesize_psf(geometry: ImagingGeometry, target_azimuth_m: float,
                   target_range_m: float,
                   truncation: PsfTruncation | None = None) -> PsfPatch:
    """PSF patch for a target position inside the imaging grid."""
    if not (math.isfinite(target_azimuth_m) and math.isfinite(target_range_m)):
        raise ValueError("target position must be finite")
    if not geometry.grid.contains(target_azimuth_m, target_range_m):
        raise ValueError(
            f"target (azimuth={target_azimuth_m} m, range={target_range_m} m) "
            "is outside the imaging grid")
    slant = geometry.slant_range(target_azimuth_m, target_range_m)
    angle = observation_angle(geometry, target_azimuth_m, target_range_m)
    return synthesize_psf_polar(geometry, slant, angle, truncation)


@dataclass(frozen=True)
class PsfQuantization:
    """Bin steps for sharing PSF patches among nearby cells.

    delta_range_m of None selects 4% of the smallest slant range, which
    bounds the azimuth-resolution error within any bin to 2%.  Either step
    may be math.inf, collapsing that axis to a single bin at the scene
    center (the spatial-invariant limit).
    """

    delta_range_m: float | None = None
    delta_angle_rad: float = math.radians(0.5)

    def __post_init__(self) -> None:
        if self.delta_range_m is not None and self.delta_range_m <= 0.0:
            raise ValueError("delta_range_m must be > 0")
        if self.delta_angle_rad <= 0.0:
            raise ValueError("delta_angle_rad must be > 0")


@dataclass(eq=False)
class PsfBank:
    """Memoized PSF patches keyed by quantized (slant range, angle) bins."""

    geometry: ImagingGeometry
    delta_range_m: float
    delta_angle_rad: float
    truncation: PsfTruncation
    patches: dict[tuple[int, int], PsfPatch] = field(default_factory=dict)

    def _center_cell_position(self) -> tuple[float, float]:
        grid = self.geometry.grid
        i, j = grid.nearest_cell(*grid.center_position())
        return grid.cell_position(i, j)

    def key_for(self, azimuth_m: float, range_m: float) -> tuple[int, int]:
        """Range bins by floor (centers at (k+1/2)*dR, always positive);
        angle bins by rounding (centers at k*dtheta, symmetric about
        boresight so bin 0 is exactly unrotated)."""
        slant = self.geometry.slant_range(azimuth_m, range_m)
        angle = observation_angle(self.geometry, azimuth_m, range_m)
        k_r = 0 if math.isinf(self.delta_range_m) else math.floor(slant / self.delta_range_m)
        k_a = 0 if math.isinf(self.delta_angle_rad) else int(np.rint(angle / self.delta_angle_rad))
        return (k_r, k_a)

    def bin_center(self, key: tuple[int, int]) -> tuple[float, float]:
        """(slant_range_m, angle_rad) at the center of a quantization bin."""
        k_r, k_a = key
        if math.isinf(self.delta_range_m) or math.isinf(self.delta_angle_rad):
            center_az, center_rg = self._center_cell_position()
        if math.isinf(self.delta_range_m):
            slant = self.geometry.slant_range(center_az, center_rg)
        else:
            slant = (k_r + 0.5) * self.delta_range_m
        if math.isinf(self.delta_angle_rad):
            angle = observation_angle(self.geometry, center_az, center_rg)
        else:
            angle = k_a * self.delta_angle_rad
        return slant, angle

    def patch_for_position(self, azimuth_m: float, range_m: float) -> PsfPatch:
        return self.patches[self.key_for(azimuth_m, range_m)]

    def patch_for_cell(self, i: int, j: int) -> PsfPatch:
        az, rg = self.geometry.grid.cell_position(i, j)
        return self.patch_for_position(az, rg)

    def center_patch(self) -> PsfPatch:
        """Patch of the scene-center cell (the spatial-invariant kernel)."""
        return self.patch_for_position(*self._center_cell_position())

    def cell_keys(self) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized (range_bin, angle_bin) indices for every grid cell."""
        grid = self.geometry.grid
        az = grid.azimuth_coords()[:, None]
        rg = grid.range_coords()[None, :]
        slant = np.hypot(az, rg)
        angle = np.arctan2(az, rg)
        if math.isinf(self.delta_range_m):
            k_r = np.zeros(grid.shape, dtype=np.int64)
        else:
            k_r = np.floor(slant / self.delta_range_m).astype(np.int64)
        if math.isinf(self.delta_angle_rad):
            k_a = np.zeros(grid.shape, dtype=np.int64)
        else:
            k_a = np.rint(angle / self.delta_angle_rad).astype(np.int64)
        return k_r, k_a


def build_psf_bank(geometry: ImagingGeometry,
                   quantization: PsfQuantization | None = None,
                   truncation: PsfTruncation | None = None) -> PsfBank:
    """Build a PSF bank covering every cell of the imaging grid."""
    if quantization is None:
        quantization = PsfQuantization()
    if truncation is None:
        truncation = PsfTruncation()
    delta_r = quantization.delta_range_m
    if delta_r is None:
        delta_r = 0.04 * geometry.min_slant_range()
    bank = PsfBank(geometry=geometry,
                   delta_range_m=delta_r,
                   delta_angle_rad=quantization.delta_angle_rad,
                   truncation=truncation)
    k_r, k_a = bank.cell_keys()
    keys = np.unique(np.stack([k_r.ravel(), k_a.ravel()], axis=1), axis=0)
    for key in map(tuple, keys.tolist()):
        slant, angle = bank.bin_center(key)
        bank.patches[key] = synthesize_psf_polar(geometry, slant, angle, truncation)
    return bank
