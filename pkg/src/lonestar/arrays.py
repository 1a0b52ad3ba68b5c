"""Uniform planar array geometry, steering vectors, and coverage grids."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HALF_PI = np.pi / 2


@dataclass(frozen=True)
class Direction:
    """Propagation direction: azimuth from boresight, elevation from horizon (radians)."""

    azimuth: float
    elevation: float

    def __post_init__(self):
        if not (-np.pi <= self.azimuth <= np.pi):
            raise ValueError(f"azimuth {self.azimuth} outside [-pi, pi]")
        if not (-HALF_PI <= self.elevation <= HALF_PI):
            raise ValueError(f"elevation {self.elevation} outside [-pi/2, pi/2]")

    @classmethod
    def from_degrees(cls, azimuth_deg: float, elevation_deg: float) -> "Direction":
        return cls(np.deg2rad(azimuth_deg), np.deg2rad(elevation_deg))


def unit_vector(direction: Direction) -> np.ndarray:
    """Unit propagation vector; boresight (az=0, el=0) points along +y."""
    az, el = direction.azimuth, direction.elevation
    return np.array(
        [np.cos(el) * np.sin(az), np.cos(el) * np.cos(az), np.sin(el)]
    )


@dataclass(frozen=True)
class UpaGeometry:
    """Uniform planar array in the x-z plane, boresight along +y.

    All lengths are in carrier wavelengths. ``origin_offset`` places the
    (row 0, col 0) reference element in space; it only affects absolute
    element positions (near-field channels), never the far-field steering
    phases, which are referenced to the array's own origin element.
    """

    rows: int
    cols: int
    element_spacing: float = 0.5
    origin_offset: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be positive")
        if not np.isfinite(self.element_spacing) or self.element_spacing <= 0:
            raise ValueError("element_spacing must be positive and finite")
        if not np.all(np.isfinite(self.origin_offset)):
            raise ValueError("origin_offset must be finite")

    @property
    def num_elements(self) -> int:
        return self.rows * self.cols

    def local_positions(self) -> np.ndarray:
        """(N, 3) element positions relative to the origin element, row-major.

        Element n = r * cols + c sits at (c*d, 0, -r*d): columns step along
        +x, rows step downward along -z so row 0 is the top of the panel.
        """
        r = np.arange(self.rows)
        c = np.arange(self.cols)
        cc, rr = np.meshgrid(c, r)  # row-major: rr, cc flatten as r*cols + c
        d = self.element_spacing
        pos = np.zeros((self.num_elements, 3))
        pos[:, 0] = cc.ravel() * d
        pos[:, 2] = -rr.ravel() * d
        return pos

    def element_positions(self) -> np.ndarray:
        """(N, 3) absolute element positions including the origin offset."""
        return self.local_positions() + np.asarray(self.origin_offset)

    def center(self) -> np.ndarray:
        return self.element_positions().mean(axis=0)


@dataclass(frozen=True)
class SteeringMatrix:
    """Stacked array response vectors, one column per coverage direction."""

    entries: np.ndarray
    region: tuple[Direction, ...]

    def __post_init__(self):
        if self.entries.ndim != 2 or self.entries.shape[1] != len(self.region):
            raise ValueError("entries must be N x len(region)")
        n = self.entries.shape[0]
        norms_sq = np.sum(np.abs(self.entries) ** 2, axis=0)
        if np.any(np.abs(norms_sq - n) > 1e-9 * n):
            raise ValueError("steering columns must have squared norm N")
        object.__setattr__(self, "region", tuple(self.region))

    @property
    def num_elements(self) -> int:
        return self.entries.shape[0]

    @property
    def num_beams(self) -> int:
        return self.entries.shape[1]


def array_response(geom: UpaGeometry, direction: Direction) -> np.ndarray:
    """Array response vector a(direction) with unit-modulus entries.

    Entry n is exp(j*2*pi*<p_n, u>) for the element position p_n (wavelengths,
    relative to the origin element) and unit propagation vector u, so the
    origin element always has phase 0 and ||a||^2 = N exactly.
    """
    phase = 2.0 * np.pi * geom.local_positions() @ unit_vector(direction)
    return np.exp(1j * phase)


def steering_matrix(geom: UpaGeometry, region) -> SteeringMatrix:
    """Assemble array response vectors for each direction into an N x M matrix."""
    region = tuple(region)
    if not region:
        raise ValueError("region must be nonempty")
    cols = [array_response(geom, d) for d in region]
    return SteeringMatrix(np.column_stack(cols), region)


def default_coverage_grid(kind: str = "transmit") -> list[Direction]:
    """45-direction service grid: az -60..60 deg, el -30..30 deg, 15 deg steps.

    Elevation is the outer loop, azimuth the inner one; identical for the
    transmit and receive sides.
    """
    if kind not in ("transmit", "receive"):
        raise ValueError(f"unknown coverage kind {kind!r}")
    azimuths = np.arange(-60.0, 60.0 + 1e-9, 15.0)
    elevations = np.arange(-30.0, 30.0 + 1e-9, 15.0)
    return [
        Direction.from_degrees(az, el) for el in elevations for az in azimuths
    ]
