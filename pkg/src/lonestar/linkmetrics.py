"""Normalized link metrics: SNRs, INRs, SINRs, rates, and the gamma_sum figure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebooks import Codebook

NEG_INF = float("-inf")


def db_to_linear(x_db: float) -> float:
    """dB to linear power ratio; -inf maps to exactly 0 (term absent)."""
    if x_db == NEG_INF:
        return 0.0
    return float(10.0 ** (x_db / 10.0))


def linear_to_db(x: float) -> float:
    if x <= 0:
        return NEG_INF
    return float(10.0 * np.log10(x))


@dataclass(frozen=True)
class LinkBudget:
    """Scale parameters abstracting all powers and path losses, in dB.

    ``snrbar_tx_db`` / ``snrbar_rx_db`` are the maximum per-link SNRs under
    full beamforming gain, ``inrbar_rx_db`` the worst-case self-interference
    INR under maximum beam coupling, and ``inr_tx_db`` the (beam-independent)
    cross-link INR at the downlink user. -inf means the term is absent.
    """

    snrbar_tx_db: float = 10.0
    snrbar_rx_db: float = 10.0
    inrbar_rx_db: float = 90.0
    inr_tx_db: float = NEG_INF

    def __post_init__(self):
        for name in ("snrbar_tx_db", "snrbar_rx_db", "inrbar_rx_db", "inr_tx_db"):
            v = getattr(self, name)
            if np.isnan(v) or v == float("inf"):
                raise ValueError(f"{name} must be finite or -inf")

    @property
    def snrbar_tx(self) -> float:
        return db_to_linear(self.snrbar_tx_db)

    @property
    def snrbar_rx(self) -> float:
        return db_to_linear(self.snrbar_rx_db)

    @property
    def inrbar_rx(self) -> float:
        return db_to_linear(self.inrbar_rx_db)

    @property
    def inr_tx(self) -> float:
        return db_to_linear(self.inr_tx_db)


@dataclass(frozen=True)
class TrialMetrics:
    """Per-trial link metrics for one downlink-uplink user pair (linear scale)."""

    snr_tx: float
    snr_rx: float
    inr_rx: float
    sinr_tx: float
    sinr_rx: float
    rate_tx: float
    rate_rx: float
    gamma_sum: float
    tx_beam_index: int
    rx_beam_index: int

    def __post_init__(self):
        if self.rate_tx < 0 or self.rate_rx < 0 or self.gamma_sum < 0:
            raise ValueError("rates and gamma_sum must be nonnegative")


def snr_tx(budget: LinkBudget, beam: np.ndarray, h_tx: np.ndarray, n_t: int) -> float:
    """Transmit-link SNR: SNRbar_tx * |h^* f|^2 / N_t^2 (power splitting built in)."""
    beam = np.asarray(beam)
    h_tx = np.asarray(h_tx)
    if beam.shape != h_tx.shape or beam.shape != (n_t,):
        raise ValueError("beam/channel dimensions do not match N_t")
    return budget.snrbar_tx * float(np.abs(np.vdot(h_tx, beam)) ** 2) / n_t**2


def snr_rx(budget: LinkBudget, beam: np.ndarray, h_rx: np.ndarray, n_r: int) -> float:
    """Receive-link SNR: SNRbar_rx * |w^* h|^2 / (N_r ||w||^2) (noise combining)."""
    beam = np.asarray(beam)
    h_rx = np.asarray(h_rx)
    if beam.shape != h_rx.shape or beam.shape != (n_r,):
        raise ValueError("beam/channel dimensions do not match N_r")
    w_sq = float(np.vdot(beam, beam).real)
    if w_sq == 0:
        raise ValueError("receive beam is zero")
    return budget.snrbar_rx * float(np.abs(np.vdot(beam, h_rx)) ** 2) / (n_r * w_sq)


def inr_rx(
    budget: LinkBudget,
    f: np.ndarray,
    w: np.ndarray,
    channel: np.ndarray,
    n_t: int,
    n_r: int,
) -> float:
    """Self-interference INR: INRbar_rx * |w^* H f|^2 / (N_t^2 N_r ||w||^2)."""
    f = np.asarray(f)
    w = np.asarray(w)
    channel = np.asarray(channel)
    if channel.shape != (n_r, n_t) or f.shape != (n_t,) or w.shape != (n_r,):
        raise ValueError("channel/beam dimensions inconsistent")
    w_sq = float(np.vdot(w, w).real)
    if w_sq == 0:
        raise ValueError("receive beam is zero")
    coupling = float(np.abs(np.vdot(w, channel @ f)) ** 2)
    return budget.inrbar_rx * coupling / (n_t**2 * n_r * w_sq)


def sinr_and_rates(snr_tx_lin, snr_rx_lin, inr_rx_lin, inr_tx_lin):
    """SINRs (interference treated as noise) and spectral efficiencies."""
    if min(snr_tx_lin, snr_rx_lin, inr_rx_lin, inr_tx_lin) < 0:
        raise ValueError("linear inputs must be nonnegative")
    sinr_tx = snr_tx_lin / (1.0 + inr_tx_lin)
    sinr_rx = snr_rx_lin / (1.0 + inr_rx_lin)
    return sinr_tx, sinr_rx, float(np.log2(1.0 + sinr_tx)), float(np.log2(1.0 + sinr_rx))


def gamma_sum(rate_tx, rate_rx, snr_cbf_tx, snr_cbf_rx) -> float:
    """Sum spectral efficiency normalized by interference-free CBF capacities.

    0.5 corresponds to half-duplexing with equal TDD on a CBF codebook; values
    near 1 mean near full-duplex codebook capacity.
    """
    denom = float(np.log2(1.0 + snr_cbf_tx) + np.log2(1.0 + snr_cbf_rx))
    if denom == 0:
        raise ZeroDivisionError("CBF codebook capacities are zero")
    return (rate_tx + rate_rx) / denom


def avg_inr(
    budget: LinkBudget, tx_cb: Codebook, rx_cb: Codebook, channel: np.ndarray
) -> tuple[float, float]:
    """Exact average INR over all beam pairs, (linear, dB).

    Uses per-pair ||w_j||^2, i.e. the exact form of the beam-pair average, not
    the Frobenius approximation (they agree when all ||w_j||^2 = N_r).
    """
    channel = np.asarray(channel)
    n_r, n_t = channel.shape
    f_mat = tx_cb.matrix
    w_mat = rx_cb.matrix
    if f_mat.shape[0] != n_t or w_mat.shape[0] != n_r:
        raise ValueError("codebooks do not match channel dimensions")
    w_sq = np.sum(np.abs(w_mat) ** 2, axis=0)
    if np.any(w_sq == 0):
        raise ValueError("receive codebook contains a zero beam")
    coupling = np.abs(w_mat.conj().T @ channel @ f_mat) ** 2  # (M_rx, M_tx)
    per_pair = coupling / (n_t**2 * n_r * w_sq[:, None])
    mean_lin = budget.inrbar_rx * float(np.mean(per_pair))
    return mean_lin, linear_to_db(mean_lin)
