"""Codebook optimizer: expected-coupling objective, convex subproblems, projected AM.

The per-side subproblem

    minimize   tr(F^* Q F)
    subject to ||N 1 - diag(A^* F)||^2 <= sigma^2 N^2 M,   |F_kj| <= 1

(Q PSD) is solved by Lagrangian dual bisection on the single coverage
constraint. For a fixed multiplier lam the problem separates per column into
box-constrained quadratics, minimized jointly by accelerated projected
gradient with per-entry unit-disk clamping; lam is bisected until the
coverage constraint is active to within the complementary-slackness
tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arrays import SteeringMatrix
from .channels import ChannelEstimate
from .codebooks import Codebook, QuantizationSpec, coverage_variance, project_codebook


class InfeasibleCoverageError(RuntimeError):
    """No magnitude-bounded codebook can meet the coverage constraint."""


@dataclass(frozen=True)
class SolverConfig:
    """Tolerated coverage variances plus subproblem/bisection tolerances."""

    sigma_tx_sq: float
    sigma_rx_sq: float
    am_passes: int = 1
    subproblem_tolerance: float = 1e-8
    subproblem_max_iters: int = 5000
    dual_bisection_tolerance: float = 1e-9

    def __post_init__(self):
        if self.sigma_tx_sq < 0 or self.sigma_rx_sq < 0:
            raise ValueError("coverage variances must be nonnegative")
        if self.am_passes < 1:
            raise ValueError("am_passes must be at least 1")
        if self.subproblem_tolerance <= 0 or self.dual_bisection_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.subproblem_max_iters < 1:
            raise ValueError("subproblem_max_iters must be positive")


@dataclass
class SubproblemInfo:
    """Diagnostics for one convex subproblem solve."""

    objective: float
    coverage_value: float
    coverage_budget: float
    multiplier: float | None
    kkt_residual: float
    iterations: int
    converged: bool


@dataclass
class DesignResult:
    """Optimized codebook pair with the objective trace of every AM step."""

    tx_codebook: Codebook
    rx_codebook: Codebook
    objective_trace: list[float]
    trace_labels: list[str]
    coverage_residual_tx: float
    coverage_residual_rx: float
    subproblem_info: list[SubproblemInfo] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return all(info.converged for info in self.subproblem_info)


def expected_objective(f_mat: np.ndarray, w_mat: np.ndarray, est: ChannelEstimate) -> float:
    """Expected beam-pair coupling power under Gaussian estimation error.

    ||W^* Hbar F||_F^2 + eps^2 ||F||_F^2 ||W||_F^2 -- the closed form of the
    coupling averaged over the error distribution.
    """
    f_mat = np.asarray(f_mat)
    w_mat = np.asarray(w_mat)
    h_bar = est.estimate
    if w_mat.shape[0] != h_bar.shape[0] or f_mat.shape[0] != h_bar.shape[1]:
        raise ValueError("F, W, and the channel estimate are not conformable")
    coupled = w_mat.conj().T @ h_bar @ f_mat
    return float(
        np.linalg.norm(coupled) ** 2
        + est.error_variance * np.linalg.norm(f_mat) ** 2 * np.linalg.norm(w_mat) ** 2
    )


def subproblem_objective(f_mat: np.ndarray, w_mat: np.ndarray, est: ChannelEstimate) -> float:
    """Objective of the convex subproblems; identical to expected_objective,
    kept separate so traces can label which matrix was being optimized."""
    return expected_objective(f_mat, w_mat, est)


def _clamp_unit_disk(x: np.ndarray) -> np.ndarray:
    mag = np.abs(x)
    scale = np.where(mag > 1.0, mag, 1.0)
    return x / scale


def _coverage_value(a_mat: np.ndarray, f_mat: np.ndarray, n_gain: float) -> float:
    """||N 1 - diag(A^* F)||^2, the complex (convex) form of the constraint."""
    s = np.sum(a_mat.conj() * f_mat, axis=0)
    return float(np.sum(np.abs(n_gain - s) ** 2))


def _max_eigenvalue(q_mat: np.ndarray, iters: int = 200, tol: float = 1e-12) -> float:
    """Largest eigenvalue of a PSD Hermitian matrix by power iteration."""
    n = q_mat.shape[0]
    v = np.ones(n, dtype=complex) + 1e-3 * np.arange(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = q_mat @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        v = w / norm
        lam_new = float(np.real(np.vdot(v, q_mat @ v)))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            lam = lam_new
            break
        lam = lam_new
    return lam


def _projected_gradient_norm(x: np.ndarray, grad: np.ndarray, active_tol: float = 1e-12) -> float:
    """Norm of the gradient projected onto feasible descent directions.

    Entries strictly inside the unit disk contribute their full gradient; on
    the boundary the outward radial component is removed (it is blocked by
    the active magnitude constraint), leaving the tangent-cone projection of
    the steepest descent direction.
    """
    neg = -grad
    mag = np.abs(x)
    active = mag >= 1.0 - active_tol
    if np.any(active):
        unit = np.zeros_like(x)
        unit[active] = x[active] / mag[active]
        radial = np.real(neg * unit.conj())
        outward = np.where(active, np.maximum(radial, 0.0), 0.0)
        neg = neg - outward * unit
    return float(np.linalg.norm(neg))


def _accelerated_pgd(q_mat, a_mat, n_gain, lam, f0, lipschitz, tol, max_iters):
    """FISTA with unit-disk clamping and restart on objective increase.

    Minimizes tr(F^* Q F) + lam ||N 1 - diag(A^* F)||^2 over |F_kj| <= 1.
    Terminates when the iterate is stationary (projected-gradient norm below
    tol relative to the objective) or when the remaining-descent certificate
    ||proj grad|| * diam bounds further progress below sqrt(tol) of the
    incoming objective; an absolute gradient threshold is unreachable when Q
    is singular, which is the normal case without estimation error.
    Returns (F, penalized objective, projected-gradient norm, iters, converged).
    """

    a_conj = a_mat.conj()

    def couplings(f_mat):
        # one matmul per call; everything else reuses these linearly
        return q_mat @ f_mat, np.sum(a_conj * f_mat, axis=0)

    def value_of(f_mat, qf, s):
        base = float(np.sum((f_mat.conj() * qf).real))
        return base + lam * float(np.sum(np.abs(n_gain - s) ** 2))

    def grad_of(f_mat, qf, s):
        return 2.0 * (qf + lam * (a_mat * (s - n_gain)[None, :]))

    step = 1.0 / lipschitz if lipschitz > 0 else 1.0
    x = _clamp_unit_disk(np.asarray(f0, dtype=complex))
    diam = 2.0 * np.sqrt(x.size)
    qx, sx = couplings(x)
    fx = value_of(x, qx, sx)
    gap_budget = np.sqrt(tol) * (1.0 + abs(fx))

    def done(f_mat, qf, s, value):
        # three certificates: stationarity, bounded remaining descent, and
        # value already below the budget (penalized objective is >= 0)
        r = _projected_gradient_norm(f_mat, grad_of(f_mat, qf, s))
        ok = (
            r <= tol * (1.0 + abs(value))
            or r * diam <= gap_budget
            or value <= gap_budget
        )
        return r, ok

    residual, converged = done(x, qx, sx, fx)
    if converged:
        return x, fx, residual, 0, True
    y, qy, sy = x, qx, sx
    t = 1.0
    iters = 0
    for iters in range(1, max_iters + 1):
        x_new = _clamp_unit_disk(y - step * grad_of(y, qy, sy))
        qxn, sxn = couplings(x_new)
        f_new = value_of(x_new, qxn, sxn)
        if f_new > fx:
            # momentum overshoot: restart from the last monotone iterate
            t = 1.0
            x_new = _clamp_unit_disk(x - step * grad_of(x, qx, sx))
            qxn, sxn = couplings(x_new)
            f_new = value_of(x_new, qxn, sxn)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_new
        y = x_new + beta * (x_new - x)
        qy = qxn + beta * (qxn - qx)
        sy = sxn + beta * (sxn - sx)
        x, qx, sx, fx, t = x_new, qxn, sxn, f_new, t_new
        if iters % 25 == 0:
            residual, converged = done(x, qx, sx, fx)
            if converged:
                return x, fx, residual, iters, True
    residual, converged = done(x, qx, sx, fx)
    return x, fx, residual, iters, converged


def _restore_equality(a_mat: np.ndarray, n_gain: float) -> np.ndarray:
    """Least-norm F with diag(A^* F) = N 1 exactly (the sigma^2 = 0 case).

    Column-wise f_j = N a_j / ||a_j||^2; for unit-modulus steering vectors this
    saturates every magnitude bound, so it is the unique feasible point.
    """
    norms_sq = np.sum(np.abs(a_mat) ** 2, axis=0)
    if np.any(norms_sq == 0):
        raise InfeasibleCoverageError("zero steering column cannot meet equality coverage")
    f_mat = a_mat * (n_gain / norms_sq)[None, :]
    if np.any(np.abs(f_mat) > 1.0 + 1e-9):
        raise InfeasibleCoverageError(
            "magnitude bounds make the zero-variance coverage constraint infeasible"
        )
    return f_mat


def _solve_coverage_qp(q_mat, a_mat, n_gain, sigma_sq, config, warm_start):
    """Dual bisection + accelerated projected gradient for one codebook side."""
    n, m = a_mat.shape
    budget = sigma_sq * n_gain**2 * m
    tol = config.subproblem_tolerance
    max_iters = config.subproblem_max_iters

    if sigma_sq == 0:
        f_mat = _restore_equality(a_mat, n_gain)
        obj = float(np.sum((f_mat.conj() * (q_mat @ f_mat)).real))
        info = SubproblemInfo(
            objective=obj,
            coverage_value=_coverage_value(a_mat, f_mat, n_gain),
            coverage_budget=0.0,
            multiplier=None,
            kkt_residual=0.0,
            iterations=0,
            converged=True,
        )
        return f_mat, info

    q_max = _max_eigenvalue(q_mat) * 1.05
    a_norm_sq = float(np.max(np.sum(np.abs(a_mat) ** 2, axis=0)))

    def solve_at(lam, start):
        lip = 2.0 * (q_max + lam * a_norm_sq)
        f_mat, _, residual, iters, ok = _accelerated_pgd(
            q_mat, a_mat, n_gain, lam, start, lip, tol, max_iters
        )
        return f_mat, _coverage_value(a_mat, f_mat, n_gain), residual, iters, ok

    total_iters = 0
    f_cur, cov, residual, iters, ok = solve_at(0.0, warm_start)
    total_iters += iters
    if cov <= budget:
        lam_star, f_star, cov_star, res_star, converged = 0.0, f_cur, cov, residual, ok
    else:
        # bracket the multiplier: coverage decreases monotonically in lam
        lam_lo, lam_hi = 0.0, max(1.0, q_max / max(a_norm_sq, 1e-30))
        f_hi, cov_hi, res_hi, iters, ok_hi = solve_at(lam_hi, f_cur)
        total_iters += iters
        while cov_hi > budget:
            lam_lo = lam_hi
            lam_hi *= 4.0
            if lam_hi > 1e18:
                raise InfeasibleCoverageError(
                    "coverage constraint unreachable under unit-magnitude weights"
                )
            f_hi, cov_hi, res_hi, iters, ok_hi = solve_at(lam_hi, f_hi)
            total_iters += iters
        # shrink until the constraint is active (complementary slackness)
        bis_tol = config.dual_bisection_tolerance
        for _ in range(200):
            if cov_hi >= budget * (1.0 - bis_tol):
                break
            if lam_hi - lam_lo <= 1e-14 * max(1.0, lam_hi):
                break
            lam_mid = 0.5 * (lam_lo + lam_hi)
            f_mid, cov_mid, res_mid, iters, ok_mid = solve_at(lam_mid, f_hi)
            total_iters += iters
            if cov_mid <= budget:
                lam_hi, f_hi, cov_hi, res_hi, ok_hi = lam_mid, f_mid, cov_mid, res_mid, ok_mid
            else:
                lam_lo = lam_mid
        lam_star, f_star, cov_star, res_star, converged = lam_hi, f_hi, cov_hi, res_hi, ok_hi

    obj = float(np.sum((f_star.conj() * (q_mat @ f_star)).real))
    info = SubproblemInfo(
        objective=obj,
        coverage_value=cov_star,
        coverage_budget=budget,
        multiplier=lam_star,
        kkt_residual=res_star,
        iterations=total_iters,
        converged=bool(converged),
    )
    return f_star, info


def _tx_quadratic(w_mat: np.ndarray, est: ChannelEstimate) -> np.ndarray:
    coupled = w_mat.conj().T @ est.estimate  # (M_rx, N_t)
    return coupled.conj().T @ coupled + est.error_variance * float(
        np.linalg.norm(w_mat) ** 2
    ) * np.eye(est.estimate.shape[1])


def _rx_quadratic(f_mat: np.ndarray, est: ChannelEstimate) -> np.ndarray:
    coupled = est.estimate @ f_mat  # (N_r, M_tx)
    return coupled @ coupled.conj().T + est.error_variance * float(
        np.linalg.norm(f_mat) ** 2
    ) * np.eye(est.estimate.shape[0])


def solve_tx_subproblem(
    w_mat: np.ndarray,
    est: ChannelEstimate,
    tx_steering: SteeringMatrix,
    sigma_tx_sq: float,
    config: SolverConfig,
    warm_start: np.ndarray | None = None,
):
    """Optimal transmit codebook with the receive side fixed (convex relaxation)."""
    a_mat = tx_steering.entries
    if warm_start is None:
        warm_start = a_mat
    q_mat = _tx_quadratic(np.asarray(w_mat), est)
    return _solve_coverage_qp(
        q_mat, a_mat, a_mat.shape[0], sigma_tx_sq, config, warm_start
    )


def solve_rx_subproblem(
    f_mat: np.ndarray,
    est: ChannelEstimate,
    rx_steering: SteeringMatrix,
    sigma_rx_sq: float,
    config: SolverConfig,
    warm_start: np.ndarray | None = None,
):
    """Optimal receive codebook with the transmit side fixed (mirror problem)."""
    a_mat = rx_steering.entries
    if warm_start is None:
        warm_start = a_mat
    q_mat = _rx_quadratic(np.asarray(f_mat), est)
    return _solve_coverage_qp(
        q_mat, a_mat, a_mat.shape[0], sigma_rx_sq, config, warm_start
    )


def lonestar_design(
    est: ChannelEstimate,
    tx_steering: SteeringMatrix,
    rx_steering: SteeringMatrix,
    spec: QuantizationSpec,
    config: SolverConfig,
) -> DesignResult:
    """Projected alternating minimization from matched-filter initialization.

    Each pass solves the transmit relaxation, projects onto the realizable
    set, then does the same for the receive side; the expected-coupling
    objective is recorded after every solve and every projection.
    """
    f_mat = project_codebook(tx_steering.entries, spec)
    w_mat = project_codebook(rx_steering.entries, spec)
    labels = ["init"]
    trace = [expected_objective(f_mat, w_mat, est)]
    infos: list[SubproblemInfo] = []

    for _ in range(config.am_passes):
        f_star, info_tx = solve_tx_subproblem(
            w_mat, est, tx_steering, config.sigma_tx_sq, config, warm_start=f_mat
        )
        infos.append(info_tx)
        labels.append("solve_tx")
        trace.append(subproblem_objective(f_star, w_mat, est))

        f_mat = project_codebook(f_star, spec)
        labels.append("project_tx")
        trace.append(expected_objective(f_mat, w_mat, est))

        w_star, info_rx = solve_rx_subproblem(
            f_mat, est, rx_steering, config.sigma_rx_sq, config, warm_start=w_mat
        )
        infos.append(info_rx)
        labels.append("solve_rx")
        trace.append(subproblem_objective(f_mat, w_star, est))

        w_mat = project_codebook(w_star, spec)
        labels.append("project_rx")
        trace.append(expected_objective(f_mat, w_mat, est))

    tx_cb = Codebook(f_mat, tx_steering.region, spec)
    rx_cb = Codebook(w_mat, rx_steering.region, spec)
    return DesignResult(
        tx_codebook=tx_cb,
        rx_codebook=rx_cb,
        objective_trace=trace,
        trace_labels=labels,
        coverage_residual_tx=coverage_variance(tx_cb, tx_steering),
        coverage_residual_rx=coverage_variance(rx_cb, rx_steering),
        subproblem_info=infos,
    )


def save_trace_csv(path, result: DesignResult) -> None:
    """Objective trace as CSV rows of (step label, objective value)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,objective\n")
        for label, value in zip(result.trace_labels, result.objective_trace):
            fh.write(f"{label},{value!r}\n")
