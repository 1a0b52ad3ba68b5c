"""Self-interference-aware analog beamforming codebooks for full-duplex mmWave.

Designs transmit/receive codebook pairs that trade a tolerated coverage
variance for reduced beam-pair coupling over an estimated self-interference
channel, and evaluates them against conjugate-beamforming and Taylor-window
baselines in a Monte Carlo link-level simulator.
"""

from .arrays import (
    Direction,
    SteeringMatrix,
    UpaGeometry,
    array_response,
    default_coverage_grid,
    steering_matrix,
)
from .channels import (
    ArrayPairLayout,
    ChannelEstimate,
    DegenerateLayoutError,
    los_user_channel,
    mixture_channel,
    perturb_estimate,
    rng_from_path,
    spherical_wave_channel,
    stacked_pair,
)
from .codebooks import (
    Codebook,
    QuantizationSpec,
    beam_gain,
    cbf_codebook,
    coverage_variance,
    load_codebook,
    project_codebook,
    project_weight,
    realizable_amplitudes,
    realizable_phases,
    save_codebook,
    taylor_codebook,
)
from .linkmetrics import (
    LinkBudget,
    TrialMetrics,
    avg_inr,
    db_to_linear,
    gamma_sum,
    inr_rx,
    linear_to_db,
    sinr_and_rates,
    snr_rx,
    snr_tx,
)
from .solver import (
    DesignResult,
    InfeasibleCoverageError,
    SolverConfig,
    expected_objective,
    lonestar_design,
    solve_rx_subproblem,
    solve_tx_subproblem,
    subproblem_objective,
)

__all__ = [name for name in dir() if not name.startswith("_")]
