import numpy as np
import pytest

from lonestar.arrays import UpaGeometry, default_coverage_grid, steering_matrix
from lonestar.channels import ChannelEstimate, rng_from_path, spherical_wave_channel, stacked_pair
from lonestar.codebooks import QuantizationSpec, cbf_codebook, project_codebook
from lonestar.solver import (
    InfeasibleCoverageError,
    SolverConfig,
    _coverage_value,
    _restore_equality,
    _solve_coverage_qp,
    expected_objective,
    lonestar_design,
    save_trace_csv,
    solve_rx_subproblem,
    solve_tx_subproblem,
    subproblem_objective,
)

cp = pytest.importorskip("cvxpy")


def random_instance(rng, n_t=6, n_r=6, m_tx=3, m_rx=3):
    h = rng.standard_normal((n_r, n_t)) + 1j * rng.standard_normal((n_r, n_t))
    h *= np.sqrt(n_t * n_r) / np.linalg.norm(h)
    w = rng.standard_normal((n_r, m_rx)) + 1j * rng.standard_normal((n_r, m_rx))
    w /= np.maximum(np.abs(w), 1.0)
    f = rng.standard_normal((n_t, m_tx)) + 1j * rng.standard_normal((n_t, m_tx))
    f /= np.maximum(np.abs(f), 1.0)
    return h, f, w


def small_steering(rows=2, cols=3, m=3):
    geom = UpaGeometry(rows, cols)
    return steering_matrix(geom, default_coverage_grid("transmit")[:m])


def cvxpy_tx_reference(w_mat, h_bar, eps_sq, a_mat, sigma_sq):
    """Independent reference: solve the transmit relaxation with a generic
    disciplined-convex solver."""
    n, m = a_mat.shape
    f = cp.Variable((n, m), complex=True)
    obj = cp.sum_squares(w_mat.conj().T @ h_bar @ f) + eps_sq * float(
        np.linalg.norm(w_mat) ** 2
    ) * cp.sum_squares(f)
    cons = [
        cp.sum_squares(n * np.ones(m) - cp.diag(a_mat.conj().T @ f))
        <= sigma_sq * n**2 * m,
        cp.abs(f) <= 1,
    ]
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver=cp.CLARABEL)
    assert prob.status == cp.OPTIMAL
    return float(prob.value), f.value


def test_expected_objective_reductions():
    rng = rng_from_path(0)
    h, f, w = random_instance(rng)
    est0 = ChannelEstimate(h, 0.0)
    assert expected_objective(f, w, est0) == pytest.approx(
        np.linalg.norm(w.conj().T @ h @ f) ** 2, rel=1e-12
    )
    assert expected_objective(np.zeros_like(f), w, est0) == 0.0
    est = ChannelEstimate(h, 0.1)
    assert subproblem_objective(f, w, est) == expected_objective(f, w, est)
    with pytest.raises(ValueError):
        expected_objective(f, w[:-1], est)


def test_expected_objective_matches_monte_carlo():
    rng = rng_from_path(1)
    h, f, w = random_instance(rng, 8, 8, 4, 4)
    eps_sq = 0.1
    est = ChannelEstimate(h, eps_sq)
    total = 0.0
    total_sq = 0.0
    n_draws = 100_000
    batch = 10_000
    for _ in range(n_draws // batch):
        delta = np.sqrt(eps_sq / 2) * (
            rng.standard_normal((batch, 8, 8)) + 1j * rng.standard_normal((batch, 8, 8))
        )
        coupled = np.einsum("ij,bjk,kl->bil", w.conj().T, h[None, :, :] + delta, f)
        vals = np.sum(np.abs(coupled) ** 2, axis=(1, 2))
        total += vals.sum()
        total_sq += (vals**2).sum()
    mean = total / n_draws
    se = np.sqrt((total_sq / n_draws - mean**2) / n_draws)
    assert abs(expected_objective(f, w, est) - mean) <= max(3 * se, 0.01 * mean)


def test_solve_tx_zero_receive_codebook():
    sm = small_steering()
    rng = rng_from_path(2)
    h, _, _ = random_instance(rng)
    cfg = SolverConfig(sigma_tx_sq=1.0, sigma_rx_sq=1.0)
    f_star, info = solve_tx_subproblem(
        np.zeros((6, 3)), ChannelEstimate(h, 0.0), sm, 1.0, cfg
    )
    assert info.objective == pytest.approx(0.0, abs=1e-12)
    assert info.coverage_value <= info.coverage_budget + 1e-9
    assert np.all(np.abs(f_star) <= 1.0 + 1e-9)


def test_solve_tx_zero_channel_keeps_feasibility():
    sm = small_steering()
    cfg = SolverConfig(sigma_tx_sq=0.05, sigma_rx_sq=0.05)
    w = np.ones((6, 3)) * 0.5
    f_star, info = solve_tx_subproblem(
        w, ChannelEstimate(np.zeros((6, 6)), 0.0), sm, 0.05, cfg
    )
    assert info.objective == pytest.approx(0.0, abs=1e-12)
    assert _coverage_value(sm.entries, f_star, 6) <= info.coverage_budget + 1e-9


@pytest.mark.parametrize("seed,eps_sq,sigma_sq", [(3, 0.0, 0.02), (4, 0.1, 0.05), (5, 0.5, 0.2)])
def test_solve_tx_matches_reference_solver(seed, eps_sq, sigma_sq):
    rng = rng_from_path(seed)
    sm = small_steering()
    h, _, w = random_instance(rng)
    cfg = SolverConfig(sigma_tx_sq=sigma_sq, sigma_rx_sq=sigma_sq)
    est = ChannelEstimate(h, eps_sq)
    f_star, info = solve_tx_subproblem(w, est, sm, sigma_sq, cfg)
    assert info.converged
    ref_obj, _ = cvxpy_tx_reference(w, h, eps_sq, sm.entries, sigma_sq)
    mine = info.objective
    assert mine <= ref_obj * 1.005 + 1e-9
    assert mine >= ref_obj * 0.995 - 1e-9


def test_tx_rx_symmetry_on_hermitian_channel():
    rng = rng_from_path(6)
    sm = small_steering()
    raw = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    h = raw + raw.conj().T
    h *= 6.0 / np.linalg.norm(h)
    w0 = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
    w0 /= np.maximum(np.abs(w0), 1.0)
    est = ChannelEstimate(h, 0.05)
    cfg = SolverConfig(sigma_tx_sq=0.1, sigma_rx_sq=0.1)
    _, info_tx = solve_tx_subproblem(w0, est, sm, 0.1, cfg)
    _, info_rx = solve_rx_subproblem(w0, est, sm, 0.1, cfg)
    assert info_tx.objective == pytest.approx(info_rx.objective, rel=1e-5)


def test_per_column_gradient_matches_finite_differences():
    rng = rng_from_path(7)
    h, f, w = random_instance(rng)
    est = ChannelEstimate(h, 0.1)
    q = h.conj().T @ w @ w.conj().T @ h + 0.1 * np.linalg.norm(w) ** 2 * np.eye(6)
    grad = 2.0 * q @ f  # d obj / d Re(f) + j * d obj / d Im(f), column-separable
    step = 1e-6
    for k, i in [(0, 0), (3, 1), (5, 2)]:
        for direction, part in ((1.0, np.real), (1.0j, np.imag)):
            bump = np.zeros_like(f)
            bump[k, i] = direction * step
            fd = (
                expected_objective(f + bump, w, est)
                - expected_objective(f - bump, w, est)
            ) / (2 * step)
            assert fd == pytest.approx(part(grad[k, i]), rel=1e-5)


def test_zero_sigma_forces_matched_filters():
    sm = small_steering()
    rng = rng_from_path(8)
    h, _, w = random_instance(rng)
    cfg = SolverConfig(sigma_tx_sq=0.0, sigma_rx_sq=0.0)
    f_star, info = solve_tx_subproblem(w, ChannelEstimate(h, 0.1), sm, 0.0, cfg)
    np.testing.assert_allclose(f_star, sm.entries, atol=1e-9)
    assert info.converged

    spec = QuantizationSpec(infinite_resolution=True)
    est = ChannelEstimate(h, 0.1)
    result = lonestar_design(est, sm, sm, spec, cfg)
    np.testing.assert_allclose(result.tx_codebook.matrix, sm.entries, atol=1e-9)
    np.testing.assert_allclose(result.rx_codebook.matrix, sm.entries, atol=1e-9)
    expected = np.linalg.norm(sm.entries.conj().T @ h @ sm.entries) ** 2 + 0.1 * (6 * 3) ** 2
    assert result.objective_trace[-1] == pytest.approx(expected, rel=1e-9)


def test_design_on_zero_channel_returns_cbf():
    sm = small_steering()
    spec = QuantizationSpec(phase_bits=4, amplitude_bits=4)
    cfg = SolverConfig(sigma_tx_sq=0.05, sigma_rx_sq=0.05)
    est = ChannelEstimate(np.zeros((6, 6)), 0.0)
    result = lonestar_design(est, sm, sm, spec, cfg)
    geom = UpaGeometry(2, 3)
    cbf = cbf_codebook(geom, sm.region, spec)
    np.testing.assert_array_equal(result.tx_codebook.matrix, cbf.matrix)
    np.testing.assert_array_equal(result.rx_codebook.matrix, cbf.matrix)
    assert result.objective_trace == pytest.approx([0.0] * 5, abs=1e-12)


def test_design_trace_monotone_across_solves():
    rng = rng_from_path(9)
    sm = small_steering(2, 3, 3)
    h, _, _ = random_instance(rng)
    est = ChannelEstimate(h, 0.01)
    spec = QuantizationSpec(phase_bits=8, amplitude_bits=8)
    cfg = SolverConfig(sigma_tx_sq=0.05, sigma_rx_sq=0.05, am_passes=2)
    result = lonestar_design(est, sm, sm, spec, cfg)
    for idx, label in enumerate(result.trace_labels):
        if label.startswith("solve"):
            prev = result.objective_trace[idx - 1]
            cur = result.objective_trace[idx]
            assert cur <= prev * (1 + 1e-9) + 1e-12


def test_design_deterministic():
    rng = rng_from_path(10)
    sm = small_steering()
    h, _, _ = random_instance(rng)
    est = ChannelEstimate(h, 0.01)
    spec = QuantizationSpec(phase_bits=6, amplitude_bits=6)
    cfg = SolverConfig(sigma_tx_sq=0.03, sigma_rx_sq=0.03)
    r1 = lonestar_design(est, sm, sm, spec, cfg)
    r2 = lonestar_design(est, sm, sm, spec, cfg)
    np.testing.assert_array_equal(r1.tx_codebook.matrix, r2.tx_codebook.matrix)
    np.testing.assert_array_equal(r1.rx_codebook.matrix, r2.rx_codebook.matrix)
    assert r1.objective_trace == r2.objective_trace


def test_kkt_residual_within_tolerance_on_active_constraint():
    rng = rng_from_path(11)
    sm = small_steering()
    h, _, w = random_instance(rng)
    cfg = SolverConfig(sigma_tx_sq=0.01, sigma_rx_sq=0.01)
    _, info = solve_tx_subproblem(w, ChannelEstimate(h, 0.2), sm, 0.01, cfg)
    assert info.converged
    assert info.multiplier is not None and info.multiplier > 0
    # constraint active at the optimum, and never violated
    assert info.coverage_value <= info.coverage_budget * (1 + 1e-12)
    assert info.coverage_value == pytest.approx(info.coverage_budget, rel=1e-4)


def test_restore_equality_infeasible_cases():
    a = np.array([[0.5], [0.5]], dtype=complex)
    with pytest.raises(InfeasibleCoverageError):
        _restore_equality(a, 2.0)
    with pytest.raises(InfeasibleCoverageError):
        _solve_coverage_qp(np.zeros((2, 2)), a, 2.0, 1e-12, SolverConfig(0.1, 0.1), a)


def test_paper_scale_design_runs_and_reduces_coupling():
    layout = stacked_pair()
    h = spherical_wave_channel(layout)
    grid = default_coverage_grid("transmit")
    tx_sm = steering_matrix(layout.tx_geom, grid)
    rx_sm = steering_matrix(layout.rx_geom, grid)
    est = ChannelEstimate(h, 0.0)
    spec = QuantizationSpec(phase_bits=8, amplitude_bits=8)
    sigma = 10.0 ** (-1.5)
    cfg = SolverConfig(sigma_tx_sq=sigma, sigma_rx_sq=sigma)
    result = lonestar_design(est, tx_sm, rx_sm, spec, cfg)
    init_obj = result.objective_trace[0]
    final_obj = result.objective_trace[-1]
    # >= 30 dB average coupling reduction vs the quantized CBF initialization
    assert final_obj <= init_obj * 1e-3
    assert result.coverage_residual_tx <= sigma * 1.5
    assert result.coverage_residual_rx <= sigma * 1.5
    assert result.converged


def test_trace_csv(tmp_path):
    sm = small_steering()
    est = ChannelEstimate(np.zeros((6, 6)), 0.0)
    cfg = SolverConfig(sigma_tx_sq=0.1, sigma_rx_sq=0.1)
    result = lonestar_design(est, sm, sm, QuantizationSpec(4, 4), cfg)
    path = tmp_path / "trace.csv"
    save_trace_csv(path, result)
    lines = path.read_text().splitlines()
    assert lines[0] == "step,objective"
    assert len(lines) == 1 + len(result.objective_trace)
