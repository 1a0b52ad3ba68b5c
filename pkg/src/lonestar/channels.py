"""Self-interference and user channel models, estimation error, and channel I/O."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrays import Direction, UpaGeometry, array_response


class DegenerateLayoutError(ValueError):
    """Raised when two array elements coincide (zero propagation distance)."""


@dataclass(frozen=True)
class ChannelEstimate:
    """Channel estimate plus the per-entry estimation-error variance (linear)."""

    estimate: np.ndarray
    error_variance: float = 0.0

    def __post_init__(self):
        if self.error_variance < 0:
            raise ValueError("error_variance must be nonnegative")
        object.__setattr__(self, "estimate", np.asarray(self.estimate, dtype=complex))


@dataclass(frozen=True)
class ArrayPairLayout:
    """Transmit and receive panels of one full-duplex transceiver.

    ``vertical_separation`` records the nominal center-to-center spacing used
    to build the default stacked layout; element positions come from the two
    geometries' own origin offsets.
    """

    tx_geom: UpaGeometry
    rx_geom: UpaGeometry
    vertical_separation: float

    def __post_init__(self):
        if self.vertical_separation <= 0:
            raise ValueError("vertical_separation must be positive")


def stacked_pair(
    rows: int = 8,
    cols: int = 8,
    element_spacing: float = 0.5,
    vertical_separation: float = 10.0,
) -> ArrayPairLayout:
    """Center-aligned vertically stacked arrays; receive panel sits above."""
    tx = UpaGeometry(rows, cols, element_spacing, origin_offset=(0.0, 0.0, 0.0))
    rx = UpaGeometry(
        rows, cols, element_spacing, origin_offset=(0.0, 0.0, vertical_separation)
    )
    return ArrayPairLayout(tx, rx, vertical_separation)


def pairwise_distances(layout: ArrayPairLayout) -> np.ndarray:
    """(N_r, N_t) distances between receive and transmit elements, wavelengths."""
    tx = layout.tx_geom.element_positions()
    rx = layout.rx_geom.element_positions()
    diff = rx[:, None, :] - tx[None, :, :]
    return np.linalg.norm(diff, axis=2)


def spherical_wave_channel(layout: ArrayPairLayout) -> np.ndarray:
    """Near-field inter-array channel, Frobenius-normalized to N_t * N_r.

    Entry (m, n) = (rho / r_nm) * exp(-j*2*pi*r_nm) with r_nm the distance in
    wavelengths between transmit element n and receive element m, and rho set
    so ||H||_F^2 = N_t * N_r.
    """
    r = pairwise_distances(layout)
    if np.any(r <= 0):
        raise DegenerateLayoutError("transmit/receive elements coincide")
    nt = layout.tx_geom.num_elements
    nr = layout.rx_geom.num_elements
    raw = np.exp(-2j * np.pi * r) / r
    rho = np.sqrt(nt * nr / np.sum(1.0 / r**2))
    return rho * raw


def complex_gaussian(
    rng: np.random.Generator, shape, variance: float
) -> np.ndarray:
    """i.i.d. circular complex Gaussian entries with total variance ``variance``."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def mixture_channel(
    layout: ArrayPairLayout, mixing_variance: float, rng: np.random.Generator
) -> np.ndarray:
    """Spherical-wave channel mixed with a Rayleigh term of variance zeta^2.

    H = (H_sw + H_ray) / ||H_sw + H_ray||_F * sqrt(N_t * N_r), so the result
    keeps the exact Frobenius normalization for any mixing variance.
    """
    if mixing_variance < 0:
        raise ValueError("mixing_variance must be nonnegative")
    h_sw = spherical_wave_channel(layout)
    h_ray = complex_gaussian(rng, h_sw.shape, mixing_variance)
    total = h_sw + h_ray
    norm = np.linalg.norm(total)
    if norm == 0:
        raise ValueError("degenerate mixture: H_sw + H_ray vanished exactly")
    nt = layout.tx_geom.num_elements
    nr = layout.rx_geom.num_elements
    return total / norm * np.sqrt(nt * nr)


def perturb_estimate(
    channel: np.ndarray, error_variance: float, rng: np.random.Generator
) -> np.ndarray:
    """Add i.i.d. circular Gaussian error of the given per-entry variance.

    The output is deliberately not re-normalized: the realized channel is
    estimate + error.
    """
    if error_variance < 0:
        raise ValueError("error_variance must be nonnegative")
    channel = np.asarray(channel, dtype=complex)
    if error_variance == 0:
        return channel.copy()
    return channel + complex_gaussian(rng, channel.shape, error_variance)


def los_user_channel(geom: UpaGeometry, direction: Direction) -> np.ndarray:
    """Line-of-sight user channel: the array response toward the user, ||h||^2 = N."""
    return array_response(geom, direction)


def rng_from_path(master_seed: int, *path: int) -> np.random.Generator:
    """Independent, reproducible stream for (master seed, index path).

    Uses SeedSequence spawn keys so Monte Carlo trials, sweep points, and
    channel draws each get a deterministic stream without shared state.
    """
    return np.random.default_rng(
        np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(path))
    )


def save_channel_csv(path, channel: np.ndarray) -> None:
    """Write a complex matrix as CSV: 'rows,cols' header, then interleaved
    real/imag values row-major, round-trip exact for float64."""
    channel = np.asarray(channel, dtype=complex)
    rows, cols = channel.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{rows},{cols}\n")
        for m in range(rows):
            parts = []
            for n in range(cols):
                v = channel[m, n]
                parts.append(f"{float(v.real)!r},{float(v.imag)!r}")
            fh.write(",".join(parts) + "\n")


def load_channel_csv(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows, cols = int(header[0]), int(header[1])
        out = np.empty((rows, cols), dtype=complex)
        for m in range(rows):
            vals = [float(tok) for tok in fh.readline().strip().split(",")]
            if len(vals) != 2 * cols:
                raise ValueError(f"row {m}: expected {2*cols} values, got {len(vals)}")
            re = np.array(vals[0::2])
            im = np.array(vals[1::2])
            out[m] = re + 1j * im
    return out
