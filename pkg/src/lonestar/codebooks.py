"""Realizable-weight quantization, baseline codebooks, and codebook quality."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import windows

from .arrays import Direction, SteeringMatrix, UpaGeometry, array_response, steering_matrix

MAGNITUDE_SLACK = 1e-12


@dataclass(frozen=True)
class QuantizationSpec:
    """Digitally controlled phase shifter / attenuator resolution.

    Phases cover the circle uniformly with 2**phase_bits settings; amplitudes
    are log-stepped attenuator settings 10**(-k*step/20), k = 0 .. 2**amp-1,
    so the deepest attenuation is finite (no explicit off state). With
    ``infinite_resolution`` the projection reduces to clamping magnitudes
    to the unit disk.
    """

    phase_bits: int = 8
    amplitude_bits: int = 8
    attenuation_step_db: float = 0.5
    infinite_resolution: bool = False

    def __post_init__(self):
        if self.phase_bits < 0 or self.amplitude_bits < 0:
            raise ValueError("bit counts must be nonnegative")
        if self.attenuation_step_db <= 0:
            raise ValueError("attenuation_step_db must be positive")


def realizable_amplitudes(spec: QuantizationSpec) -> np.ndarray:
    """Attenuator settings, descending from 1."""
    k = np.arange(2**spec.amplitude_bits)
    return 10.0 ** (-k * spec.attenuation_step_db / 20.0)


def realizable_phases(spec: QuantizationSpec) -> np.ndarray:
    """Phase shifter settings 2*pi*k / 2**b, k = 0 .. 2**b - 1."""
    n = 2**spec.phase_bits
    return 2.0 * np.pi * np.arange(n) / n


def quantize_indices(matrix: np.ndarray, spec: QuantizationSpec):
    """Nearest attenuator and phase-shifter setting per entry.

    Amplitude minimizes |A_k - |w||; phase minimizes the chord distance
    |exp(j*theta_k) - exp(j*angle(w))|. Ties go to the smaller index in the
    enumerated set (argmin takes the first minimum).
    """
    if spec.infinite_resolution:
        raise ValueError("infinite-resolution weights have no quantizer indices")
    w = np.asarray(matrix, dtype=complex).ravel()
    amps = realizable_amplitudes(spec)
    amp_idx = np.argmin(np.abs(amps[None, :] - np.abs(w)[:, None]), axis=1)
    phasor = np.where(w == 0, 1.0 + 0j, np.exp(1j * np.angle(w)))
    settings = np.exp(1j * realizable_phases(spec))
    phase_idx = np.argmin(np.abs(settings[None, :] - phasor[:, None]), axis=1)
    shape = np.shape(matrix)
    return amp_idx.reshape(shape), phase_idx.reshape(shape)


def weights_from_indices(amp_idx, phase_idx, spec: QuantizationSpec) -> np.ndarray:
    return realizable_amplitudes(spec)[amp_idx] * np.exp(
        1j * realizable_phases(spec)[phase_idx]
    )


def project_codebook(matrix: np.ndarray, spec: QuantizationSpec) -> np.ndarray:
    """Element-wise projection onto the realizable weight set."""
    matrix = np.asarray(matrix, dtype=complex)
    if spec.infinite_resolution:
        mag = np.abs(matrix)
        over = mag > 1.0
        out = matrix.copy()
        out[over] = matrix[over] / mag[over]
        return out
    amp_idx, phase_idx = quantize_indices(matrix, spec)
    return weights_from_indices(amp_idx, phase_idx, spec)


def project_weight(weight: complex, spec: QuantizationSpec) -> complex:
    """Project a single beamforming weight onto the realizable set."""
    return complex(project_codebook(np.array([[weight]]), spec)[0, 0])


@dataclass(frozen=True)
class Codebook:
    """Beamforming vectors stacked as columns, plus the region they serve."""

    matrix: np.ndarray
    region: tuple[Direction, ...] | None = None
    quantized_under: QuantizationSpec | None = None

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", matrix)
        if matrix.ndim != 2:
            raise ValueError("codebook matrix must be 2-D")
        if np.any(np.abs(matrix) > 1.0 + MAGNITUDE_SLACK):
            raise ValueError("codebook entries exceed unit magnitude")
        if self.region is not None:
            region = tuple(self.region)
            if len(region) != matrix.shape[1]:
                raise ValueError("region length must match beam count")
            object.__setattr__(self, "region", region)
        if self.quantized_under is not None:
            if not np.array_equal(project_codebook(matrix, self.quantized_under), matrix):
                raise ValueError("matrix is not quantized under the given spec")

    @property
    def num_elements(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_beams(self) -> int:
        return self.matrix.shape[1]

    def beam(self, index: int) -> np.ndarray:
        return self.matrix[:, index]


def cbf_codebook(geom: UpaGeometry, region, spec: QuantizationSpec) -> Codebook:
    """Conjugate (matched filter) beams, projected onto the realizable set."""
    steering = steering_matrix(geom, region)
    return Codebook(project_codebook(steering.entries, spec), steering.region, spec)


def tapered_codebook(
    geom: UpaGeometry, region, spec: QuantizationSpec, taper: np.ndarray
) -> Codebook:
    """Conjugate beams with a per-element amplitude taper (peak normalized to 1)."""
    taper = np.asarray(taper, dtype=float).ravel()
    if taper.size != geom.num_elements:
        raise ValueError("taper length must match element count")
    if np.any(taper < 0) or not np.all(np.isfinite(taper)):
        raise ValueError("taper must be finite and nonnegative")
    peak = taper.max()
    if peak == 0:
        raise ValueError("taper is identically zero")
    taper = taper / peak
    steering = steering_matrix(geom, region)
    shaped = steering.entries * taper[:, None]
    return Codebook(project_codebook(shaped, spec), steering.region, spec)


def taylor_taper(geom: UpaGeometry, sll_db: float, nbar: int = 4) -> np.ndarray:
    """Separable 2-D Taylor window over the panel, row-major, peak 1."""
    if sll_db <= 0:
        raise ValueError("sll_db must be a positive suppression depth")
    if nbar < 1:
        raise ValueError("nbar must be at least 1")
    w_row = windows.taylor(geom.rows, nbar=nbar, sll=sll_db, norm=False)
    w_col = windows.taylor(geom.cols, nbar=nbar, sll=sll_db, norm=False)
    w_row = w_row / w_row.max()
    w_col = w_col / w_col.max()
    return np.outer(w_row, w_col).ravel()


def taylor_codebook(
    geom: UpaGeometry,
    region,
    spec: QuantizationSpec,
    sll_db: float = 25.0,
    nbar: int = 4,
) -> Codebook:
    """Conjugate beams shaped by a Taylor window for side-lobe suppression."""
    return tapered_codebook(geom, region, spec, taylor_taper(geom, sll_db, nbar))


def beam_gain(beam: np.ndarray, geom: UpaGeometry, direction: Direction) -> float:
    """Linear power gain |a(direction)^* f|^2; at most N^2 for ||f||^2 <= N."""
    beam = np.asarray(beam)
    if beam.shape != (geom.num_elements,):
        raise ValueError(
            f"beam length {beam.shape} does not match {geom.num_elements} elements"
        )
    return float(np.abs(np.vdot(array_response(geom, direction), beam)) ** 2)


def coverage_variance(cb: Codebook, steering: SteeringMatrix) -> float:
    """Normalized mean-square shortfall from maximum gain over the region.

    (1/M) * sum_i |N - |a_i^* f_i||^2 / N^2 -- the magnitude form, since beams
    are useful up to a global phase.
    """
    if cb.region != steering.region:
        raise ValueError("codebook and steering matrix serve different regions")
    n = steering.num_elements
    gains = np.abs(np.sum(steering.entries.conj() * cb.matrix, axis=0))
    return float(np.mean(np.abs(n - gains) ** 2) / n**2)


def save_codebook(path, cb: Codebook) -> None:
    """Write a quantized codebook as CSV of quantizer indices (bit-exact I/O).

    Header: N, M, phase_bits, amplitude_bits, attenuation step (dB). Each of
    the N following rows interleaves (amplitude index, phase index) per beam.
    """
    spec = cb.quantized_under
    if spec is None or spec.infinite_resolution:
        raise ValueError("only finite-resolution quantized codebooks are index-codable")
    amp_idx, phase_idx = quantize_indices(cb.matrix, spec)
    n, m = cb.matrix.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            f"{n},{m},{spec.phase_bits},{spec.amplitude_bits},"
            f"{spec.attenuation_step_db!r}\n"
        )
        for row in range(n):
            pairs = []
            for col in range(m):
                pairs.append(f"{amp_idx[row, col]},{phase_idx[row, col]}")
            fh.write(",".join(pairs) + "\n")


def load_codebook(path, region=None) -> Codebook:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        n, m = int(header[0]), int(header[1])
        spec = QuantizationSpec(
            phase_bits=int(header[2]),
            amplitude_bits=int(header[3]),
            attenuation_step_db=float(header[4]),
        )
        amp_idx = np.empty((n, m), dtype=int)
        phase_idx = np.empty((n, m), dtype=int)
        for row in range(n):
            vals = [int(tok) for tok in fh.readline().strip().split(",")]
            if len(vals) != 2 * m:
                raise ValueError(f"row {row}: expected {2*m} indices, got {len(vals)}")
            amp_idx[row] = vals[0::2]
            phase_idx[row] = vals[1::2]
    matrix = weights_from_indices(amp_idx, phase_idx, spec)
    return Codebook(matrix, region, spec)
