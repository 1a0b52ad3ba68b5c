"""Monte Carlo harness: user draws, beam alignment, sigma tuning, and sweeps."""

from __future__ import annotations

import hashlib
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .arrays import Direction, SteeringMatrix, UpaGeometry, steering_matrix
from .channels import (
    ArrayPairLayout,
    ChannelEstimate,
    complex_gaussian,
    los_user_channel,
    mixture_channel,
    rng_from_path,
    spherical_wave_channel,
)
from .codebooks import Codebook, QuantizationSpec, cbf_codebook, taylor_codebook
from .linkmetrics import (
    LinkBudget,
    TrialMetrics,
    db_to_linear,
    gamma_sum,
    linear_to_db,
    sinr_and_rates,
)
from .solver import DesignResult, SolverConfig, lonestar_design

EXPERIMENTS = (
    "snr_sweep",
    "inr_sweep",
    "snr_heatmap",
    "inr_heatmap",
    "error_sweep",
    "mixing_sweep",
    "sigma_sweep",
)

EXPERIMENT_AXES = {
    "snr_sweep": ("snrbar_db",),
    "inr_sweep": ("inrbar_rx_db",),
    "snr_heatmap": ("snrbar_tx_db", "snrbar_rx_db"),
    "inr_heatmap": ("inr_tx_db", "inrbar_rx_db"),
    "error_sweep": ("error_variance_db",),
    "mixing_sweep": ("mixing_variance_db",),
    "sigma_sweep": ("sigma_sq_db", "inrbar_rx_db"),
}

DEFAULT_SIGMA_GRID_DB = tuple(float(x) for x in range(-40, 1, 5))


def default_sigma_grid() -> tuple[tuple[float, float], ...]:
    """sigma_tx^2 = sigma_rx^2 candidates from -40 dB to 0 dB in 5 dB steps."""
    return tuple((db_to_linear(db), db_to_linear(db)) for db in DEFAULT_SIGMA_GRID_DB)


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo configuration; every draw derives from the master seed."""

    num_user_pairs: int = 500
    master_seed: int = 0
    user_az_bounds: tuple[float, float] = (-np.deg2rad(67.5), np.deg2rad(67.5))
    user_el_bounds: tuple[float, float] = (-np.deg2rad(37.5), np.deg2rad(37.5))
    budget: LinkBudget = field(default_factory=LinkBudget)
    sigma_grid: tuple[tuple[float, float], ...] = field(default_factory=default_sigma_grid)

    def __post_init__(self):
        if self.num_user_pairs < 1:
            raise ValueError("num_user_pairs must be at least 1")
        if not (self.user_az_bounds[0] <= self.user_az_bounds[1]):
            raise ValueError("user_az_bounds must be ordered")
        if not (self.user_el_bounds[0] <= self.user_el_bounds[1]):
            raise ValueError("user_el_bounds must be ordered")
        if not self.sigma_grid:
            raise ValueError("sigma_grid must be nonempty")


@dataclass(frozen=True)
class UserPair:
    """One downlink-uplink user realization with its LoS channel vectors."""

    tx_direction: Direction
    rx_direction: Direction
    h_tx: np.ndarray
    h_rx: np.ndarray


@dataclass(frozen=True)
class ChannelModel:
    """Self-interference realization policy for one experiment point.

    kind "fixed": every trial sees ``channel`` as the true channel.
    kind "estimate_error": trial t sees ``channel`` (the estimate) plus a
    fresh i.i.d. Gaussian error draw of variance ``error_variance``.
    """

    kind: str
    channel: np.ndarray
    error_variance: float = 0.0

    def __post_init__(self):
        if self.kind not in ("fixed", "estimate_error"):
            raise ValueError(f"unknown channel model kind {self.kind!r}")
        if self.error_variance < 0:
            raise ValueError("error_variance must be nonnegative")


@dataclass
class MonteCarloResult:
    mean_gamma_sum: float
    gamma_sum_stderr: float
    mean_rate_tx: float
    mean_rate_rx: float
    mean_inr_rx: float
    trials: int
    per_trial: list[TrialMetrics]
    draw_digest: str

    @property
    def mean_inr_rx_db(self) -> float:
        return linear_to_db(self.mean_inr_rx)


def beam_align(cb: Codebook, h: np.ndarray, kind: str, budget: LinkBudget):
    """Exhaustive sweep: the beam index maximizing the link SNR, plus that SNR.

    Ties break toward the lower beam index; an all-zero codebook yields
    (0, 0.0). Zero beams never win unless every beam is zero.
    """
    if cb.num_beams == 0:
        raise ValueError("codebook is empty")
    h = np.asarray(h)
    if kind == "transmit":
        n_t = cb.num_elements
        gains = np.abs(h.conj() @ cb.matrix) ** 2
        snrs = budget.snrbar_tx * gains / n_t**2
    elif kind == "receive":
        n_r = cb.num_elements
        w_sq = np.sum(np.abs(cb.matrix) ** 2, axis=0)
        gains = np.abs(cb.matrix.conj().T @ h) ** 2
        snrs = np.where(w_sq > 0, budget.snrbar_rx * gains / (n_r * np.where(w_sq > 0, w_sq, 1.0)), 0.0)
    else:
        raise ValueError(f"unknown alignment kind {kind!r}")
    idx = int(np.argmax(snrs))
    return idx, float(snrs[idx])


def run_trial(
    tx_cb: Codebook,
    rx_cb: Codebook,
    h_true: np.ndarray,
    budget: LinkBudget,
    user: UserPair,
    cbf_pair: tuple[Codebook, Codebook],
) -> TrialMetrics:
    """Align beams independently per link, then score the full-duplex trial.

    The gamma_sum denominator uses the CBF reference pair's alignment SNRs for
    the same user, with interference absent.
    """
    n_t = tx_cb.num_elements
    n_r = rx_cb.num_elements
    t_idx, snr_t = beam_align(tx_cb, user.h_tx, "transmit", budget)
    r_idx, snr_r = beam_align(rx_cb, user.h_rx, "receive", budget)
    f = tx_cb.beam(t_idx)
    w = rx_cb.beam(r_idx)
    w_sq = float(np.vdot(w, w).real)
    if w_sq > 0:
        coupling = float(np.abs(np.vdot(w, np.asarray(h_true) @ f)) ** 2)
        inr = budget.inrbar_rx * coupling / (n_t**2 * n_r * w_sq)
    else:
        inr = 0.0
    sinr_t, sinr_r, rate_t, rate_r = sinr_and_rates(snr_t, snr_r, inr, budget.inr_tx)
    _, snr_cbf_t = beam_align(cbf_pair[0], user.h_tx, "transmit", budget)
    _, snr_cbf_r = beam_align(cbf_pair[1], user.h_rx, "receive", budget)
    gamma = gamma_sum(rate_t, rate_r, snr_cbf_t, snr_cbf_r)
    return TrialMetrics(
        snr_tx=snr_t,
        snr_rx=snr_r,
        inr_rx=inr,
        sinr_tx=sinr_t,
        sinr_rx=sinr_r,
        rate_tx=rate_t,
        rate_rx=rate_r,
        gamma_sum=gamma,
        tx_beam_index=t_idx,
        rx_beam_index=r_idx,
    )


def draw_user_pairs(
    cfg: SimConfig, tx_geom: UpaGeometry, rx_geom: UpaGeometry, point_index: int = 0
) -> list[UserPair]:
    """Independent uniform user pairs; trial t uses stream (seed, point, 0, t)."""
    pairs = []
    for t in range(cfg.num_user_pairs):
        rng = rng_from_path(cfg.master_seed, point_index, 0, t)
        az = rng.uniform(*cfg.user_az_bounds, size=2)
        el = rng.uniform(*cfg.user_el_bounds, size=2)
        d_tx = Direction(float(az[0]), float(el[0]))
        d_rx = Direction(float(az[1]), float(el[1]))
        pairs.append(
            UserPair(d_tx, d_rx, los_user_channel(tx_geom, d_tx), los_user_channel(rx_geom, d_rx))
        )
    return pairs


def realize_channels(
    model: ChannelModel, cfg: SimConfig, point_index: int = 0
) -> list[np.ndarray]:
    """Per-trial true channels; error draws use streams (seed, point, 1, t)."""
    if model.kind == "fixed" or model.error_variance == 0:
        return [model.channel] * cfg.num_user_pairs
    out = []
    for t in range(cfg.num_user_pairs):
        rng = rng_from_path(cfg.master_seed, point_index, 1, t)
        out.append(model.channel + complex_gaussian(rng, model.channel.shape, model.error_variance))
    return out


def draws_digest(users: list[UserPair], channels: list[np.ndarray]) -> str:
    """Digest of everything the trials will see, for common-random-number audits."""
    digest = hashlib.sha256()
    for user in users:
        digest.update(
            np.array(
                [
                    user.tx_direction.azimuth,
                    user.tx_direction.elevation,
                    user.rx_direction.azimuth,
                    user.rx_direction.elevation,
                ]
            ).tobytes()
        )
    last = None
    for h in channels:
        if h is last:
            digest.update(b"=")  # same realization as previous trial
            continue
        digest.update(np.ascontiguousarray(h).tobytes())
        last = h
    return digest.hexdigest()


def evaluate_on_draws(
    tx_cb: Codebook,
    rx_cb: Codebook,
    cbf_pair: tuple[Codebook, Codebook],
    budget: LinkBudget,
    users: list[UserPair],
    channels: list[np.ndarray],
    digest: str,
) -> MonteCarloResult:
    records = [
        run_trial(tx_cb, rx_cb, h, budget, user, cbf_pair)
        for user, h in zip(users, channels)
    ]
    gammas = np.array([r.gamma_sum for r in records])
    stderr = float(gammas.std(ddof=1) / np.sqrt(len(gammas))) if len(gammas) > 1 else 0.0
    return MonteCarloResult(
        mean_gamma_sum=float(gammas.mean()),
        gamma_sum_stderr=stderr,
        mean_rate_tx=float(np.mean([r.rate_tx for r in records])),
        mean_rate_rx=float(np.mean([r.rate_rx for r in records])),
        mean_inr_rx=float(np.mean([r.inr_rx for r in records])),
        trials=len(records),
        per_trial=records,
        draw_digest=digest,
    )


def monte_carlo(
    tx_cb: Codebook,
    rx_cb: Codebook,
    cbf_pair: tuple[Codebook, Codebook],
    model: ChannelModel,
    cfg: SimConfig,
    tx_geom: UpaGeometry,
    rx_geom: UpaGeometry,
    point_index: int = 0,
) -> MonteCarloResult:
    """Average trial metrics over seeded user/channel draws (reproducible)."""
    users = draw_user_pairs(cfg, tx_geom, rx_geom, point_index)
    channels = realize_channels(model, cfg, point_index)
    digest = draws_digest(users, channels)
    return evaluate_on_draws(tx_cb, rx_cb, cbf_pair, cfg.budget, users, channels, digest)


def _design_cache_key(est, sigma_tx_sq, sigma_rx_sq, spec, solver):
    channel_id = hashlib.sha256(np.ascontiguousarray(est.estimate).tobytes()).hexdigest()
    return (
        channel_id,
        est.error_variance,
        sigma_tx_sq,
        sigma_rx_sq,
        spec,
        solver.am_passes,
        solver.subproblem_tolerance,
        solver.subproblem_max_iters,
        solver.dual_bisection_tolerance,
    )


def design_with_cache(
    est: ChannelEstimate,
    tx_steering: SteeringMatrix,
    rx_steering: SteeringMatrix,
    spec: QuantizationSpec,
    solver: SolverConfig,
    cache: dict | None,
) -> DesignResult:
    if cache is None:
        return lonestar_design(est, tx_steering, rx_steering, spec, solver)
    key = _design_cache_key(est, solver.sigma_tx_sq, solver.sigma_rx_sq, spec, solver)
    if key not in cache:
        cache[key] = lonestar_design(est, tx_steering, rx_steering, spec, solver)
    return cache[key]


@dataclass
class TuneResult:
    sigma_tx_sq: float
    sigma_rx_sq: float
    design: DesignResult
    evaluations: list[tuple[float, float, float]]  # (sigma_tx_sq, sigma_rx_sq, mean gamma)


def tune_sigma(
    est: ChannelEstimate,
    tx_steering: SteeringMatrix,
    rx_steering: SteeringMatrix,
    spec: QuantizationSpec,
    model: ChannelModel,
    cfg: SimConfig,
    tx_geom: UpaGeometry,
    rx_geom: UpaGeometry,
    cbf_pair: tuple[Codebook, Codebook],
    solver: SolverConfig,
    point_index: int = 0,
    cache: dict | None = None,
) -> TuneResult:
    """Pick the coverage-variance grid point maximizing mean gamma_sum.

    All candidates are scored on the same user/channel draws; ties go to the
    smaller variance (the grid is scanned in ascending order and only strict
    improvements replace the incumbent).
    """
    users = draw_user_pairs(cfg, tx_geom, rx_geom, point_index)
    channels = realize_channels(model, cfg, point_index)
    digest = draws_digest(users, channels)
    ordered = sorted(cfg.sigma_grid, key=lambda s: (s[0], s[1]))
    best = None
    evaluations = []
    for sigma_tx_sq, sigma_rx_sq in ordered:
        candidate_cfg = replace(solver, sigma_tx_sq=sigma_tx_sq, sigma_rx_sq=sigma_rx_sq)
        design = design_with_cache(est, tx_steering, rx_steering, spec, candidate_cfg, cache)
        result = evaluate_on_draws(
            design.tx_codebook, design.rx_codebook, cbf_pair, cfg.budget, users, channels, digest
        )
        evaluations.append((sigma_tx_sq, sigma_rx_sq, result.mean_gamma_sum))
        if best is None or result.mean_gamma_sum > best[2]:
            best = (sigma_tx_sq, sigma_rx_sq, result.mean_gamma_sum, design)
    return TuneResult(best[0], best[1], best[3], evaluations)


@dataclass(frozen=True)
class SweepContext:
    """Everything a sweep needs beyond the Monte Carlo configuration."""

    layout: ArrayPairLayout
    tx_grid: tuple[Direction, ...]
    rx_grid: tuple[Direction, ...]
    lonestar_specs: tuple[QuantizationSpec, ...]
    baseline_spec: QuantizationSpec = QuantizationSpec(phase_bits=8, amplitude_bits=8)
    solver: SolverConfig = SolverConfig(sigma_tx_sq=10 ** (-1.5), sigma_rx_sq=10 ** (-1.5))
    tune: bool = True
    taylor_sll_db: float = 25.0
    workers: int = 1


@dataclass
class SweepRecord:
    axes: dict[str, float]
    codebook: str
    mean_gamma_sum: float
    mean_rate_tx: float
    mean_rate_rx: float
    mean_inr_rx_db: float
    tuned_sigma_sq: float | None
    trials: int
    gamma_sum_stderr: float


@dataclass
class SweepResult:
    experiment: str
    axis_names: tuple[str, ...]
    records: list[SweepRecord]

    def to_csv(self) -> str:
        cols = list(self.axis_names) + [
            "codebook",
            "mean_gamma_sum",
            "mean_rate_tx",
            "mean_rate_rx",
            "mean_inr_rx_db",
            "tuned_sigma_sq",
            "trials",
            "gamma_sum_stderr",
        ]
        lines = [",".join(cols)]
        for rec in self.records:
            parts = [repr(float(rec.axes[name])) for name in self.axis_names]
            parts.append(rec.codebook)
            parts.append(repr(float(rec.mean_gamma_sum)))
            parts.append(repr(float(rec.mean_rate_tx)))
            parts.append(repr(float(rec.mean_rate_rx)))
            parts.append(repr(float(rec.mean_inr_rx_db)))
            parts.append("" if rec.tuned_sigma_sq is None else repr(float(rec.tuned_sigma_sq)))
            parts.append(str(rec.trials))
            parts.append(repr(float(rec.gamma_sum_stderr)))
            lines.append(",".join(parts))
        return "\n".join(lines) + "\n"


def spec_label(spec: QuantizationSpec) -> str:
    if spec.infinite_resolution:
        return "lonestar_inf"
    if spec.phase_bits == spec.amplitude_bits:
        return f"lonestar_b{spec.phase_bits}"
    return f"lonestar_p{spec.phase_bits}a{spec.amplitude_bits}"


def _point_budget(experiment: str, point: dict[str, float], base: LinkBudget) -> LinkBudget:
    if experiment == "snr_sweep":
        return replace(base, snrbar_tx_db=point["snrbar_db"], snrbar_rx_db=point["snrbar_db"])
    if experiment in ("inr_sweep", "sigma_sweep"):
        return replace(base, inrbar_rx_db=point["inrbar_rx_db"])
    if experiment == "snr_heatmap":
        return replace(
            base, snrbar_tx_db=point["snrbar_tx_db"], snrbar_rx_db=point["snrbar_rx_db"]
        )
    if experiment == "inr_heatmap":
        return replace(
            base, inr_tx_db=point["inr_tx_db"], inrbar_rx_db=point["inrbar_rx_db"]
        )
    return base


def _evaluate_point(args) -> list[SweepRecord]:
    experiment, point, point_index, cfg, ctx, cache = args
    tx_geom = ctx.layout.tx_geom
    rx_geom = ctx.layout.rx_geom
    tx_steering = steering_matrix(tx_geom, ctx.tx_grid)
    rx_steering = steering_matrix(rx_geom, ctx.rx_grid)
    cbf_pair = (
        cbf_codebook(tx_geom, ctx.tx_grid, ctx.baseline_spec),
        cbf_codebook(rx_geom, ctx.rx_grid, ctx.baseline_spec),
    )
    taylor_pair = (
        taylor_codebook(tx_geom, ctx.tx_grid, ctx.baseline_spec, ctx.taylor_sll_db),
        taylor_codebook(rx_geom, ctx.rx_grid, ctx.baseline_spec, ctx.taylor_sll_db),
    )

    h_sw = spherical_wave_channel(ctx.layout)
    if experiment == "error_sweep":
        eps_sq = db_to_linear(point["error_variance_db"])
        est = ChannelEstimate(h_sw, eps_sq)
        model = ChannelModel("estimate_error", h_sw, eps_sq)
    elif experiment == "mixing_sweep":
        zeta_sq = db_to_linear(point["mixing_variance_db"])
        h_true = mixture_channel(
            ctx.layout, zeta_sq, rng_from_path(cfg.master_seed, point_index, 2)
        )
        est = ChannelEstimate(h_true, 0.0)  # solver granted perfect knowledge
        model = ChannelModel("fixed", h_true)
    else:
        est = ChannelEstimate(h_sw, 0.0)
        model = ChannelModel("fixed", h_sw)

    budget = _point_budget(experiment, point, cfg.budget)
    point_cfg = replace(cfg, budget=budget)

    users = draw_user_pairs(point_cfg, tx_geom, rx_geom, point_index)
    channels = realize_channels(model, point_cfg, point_index)
    digest = draws_digest(users, channels)

    records = []
    for spec in ctx.lonestar_specs:
        if experiment == "sigma_sweep":
            sigma_sq = db_to_linear(point["sigma_sq_db"])
            solver = replace(ctx.solver, sigma_tx_sq=sigma_sq, sigma_rx_sq=sigma_sq)
            design = design_with_cache(est, tx_steering, rx_steering, spec, solver, cache)
            tuned = sigma_sq
        elif ctx.tune:
            tune = tune_sigma(
                est,
                tx_steering,
                rx_steering,
                spec,
                model,
                point_cfg,
                tx_geom,
                rx_geom,
                cbf_pair,
                ctx.solver,
                point_index=point_index,
                cache=cache,
            )
            design = tune.design
            tuned = tune.sigma_tx_sq
        else:
            design = design_with_cache(est, tx_steering, rx_steering, spec, ctx.solver, cache)
            tuned = ctx.solver.sigma_tx_sq
        result = evaluate_on_draws(
            design.tx_codebook, design.rx_codebook, cbf_pair, budget, users, channels, digest
        )
        records.append(_record(point, spec_label(spec), result, tuned))

    for label, pair in (("cbf", cbf_pair), ("taylor", taylor_pair)):
        result = evaluate_on_draws(pair[0], pair[1], cbf_pair, budget, users, channels, digest)
        records.append(_record(point, label, result, None))
    return records


def _record(point, label, result: MonteCarloResult, tuned_sigma_sq) -> SweepRecord:
    return SweepRecord(
        axes=dict(point),
        codebook=label,
        mean_gamma_sum=result.mean_gamma_sum,
        mean_rate_tx=result.mean_rate_tx,
        mean_rate_rx=result.mean_rate_rx,
        mean_inr_rx_db=result.mean_inr_rx_db,
        tuned_sigma_sq=tuned_sigma_sq,
        trials=result.trials,
        gamma_sum_stderr=result.gamma_sum_stderr,
    )


def sweep(
    experiment: str,
    axes: dict[str, list[float]],
    cfg: SimConfig,
    ctx: SweepContext,
) -> SweepResult:
    """Evaluate every codebook at every grid point with shared draws per point.

    Points are independent: with ``ctx.workers > 1`` they run in separate
    processes, and the aggregation order (hence the CSV) is identical either
    way. When tuning is enabled the design is re-tuned at every point.
    """
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}")
    names = EXPERIMENT_AXES[experiment]
    if tuple(axes.keys()) != tuple(names):
        raise ValueError(f"experiment {experiment} needs axes {names}, got {tuple(axes)}")
    for name in names:
        if not axes[name]:
            raise ValueError(f"axis {name} is empty")
    points = [
        dict(zip(names, values)) for values in itertools.product(*(axes[n] for n in names))
    ]
    if ctx.workers > 1:
        jobs = [(experiment, point, i, cfg, ctx, None) for i, point in enumerate(points)]
        with ProcessPoolExecutor(max_workers=ctx.workers) as pool:
            per_point = list(pool.map(_evaluate_point, jobs))
    else:
        cache: dict = {}  # reuse designs across points (budget-independent)
        per_point = [
            _evaluate_point((experiment, point, i, cfg, ctx, cache))
            for i, point in enumerate(points)
        ]
    records = [rec for recs in per_point for rec in recs]
    return SweepResult(experiment, tuple(names), records)
