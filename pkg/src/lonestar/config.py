"""Flat key-value experiment configuration: defaults, parsing, and echo."""

from __future__ import annotations

import configparser
from dataclasses import dataclass

import numpy as np

from .arrays import Direction, UpaGeometry
from .channels import ArrayPairLayout, stacked_pair
from .codebooks import QuantizationSpec
from .linkmetrics import LinkBudget, db_to_linear
from .sim import SimConfig, SweepContext
from .solver import SolverConfig


class ConfigError(ValueError):
    """Invalid or missing configuration; the message names the offending key."""


DEFAULTS: dict[str, dict[str, str]] = {
    "array": {
        "rows": "8",
        "cols": "8",
        "element_spacing_wavelengths": "0.5",
        "vertical_separation_wavelengths": "10.0",
    },
    "coverage": {
        "az_min_deg": "-60",
        "az_max_deg": "60",
        "az_step_deg": "15",
        "el_min_deg": "-30",
        "el_max_deg": "30",
        "el_step_deg": "15",
    },
    "quantization": {
        "phase_bits": "8",
        "amplitude_bits": "8",
        "attenuation_step_db": "0.5",
        "infinite_resolution": "false",
    },
    "budget": {
        "snrbar_tx_db": "10",
        "snrbar_rx_db": "10",
        "inrbar_rx_db": "90",
        "inr_tx_db": "-inf",
    },
    "channel": {
        "kind": "spherical",
        "mixing_variance_db": "-inf",
        "error_variance_db": "-inf",
    },
    "solver": {
        "sigma_tx_sq_db": "-15",
        "sigma_rx_sq_db": "-15",
        "am_passes": "1",
        "subproblem_tolerance": "1e-8",
        "subproblem_max_iters": "5000",
        "dual_bisection_tolerance": "1e-9",
    },
    "sim": {
        "num_user_pairs": "500",
        "master_seed": "0",
        "user_az_min_deg": "-67.5",
        "user_az_max_deg": "67.5",
        "user_el_min_deg": "-37.5",
        "user_el_max_deg": "37.5",
        "sigma_grid_db": "-40,-35,-30,-25,-20,-15,-10,-5,0",
        "tune_sigma": "true",
    },
    "sweep": {
        "lonestar_bits": "8",
        "snrbar_db_grid": "-10,-5,0,5,10,15,20",
        "inrbar_rx_db_grid": "50,60,70,80,90,100,110,120",
        "snrbar_tx_db_grid": "-10,0,10,20",
        "snrbar_rx_db_grid": "-10,0,10,20",
        "inr_tx_db_grid": "-30,-20,-10,0,10",
        "error_variance_db_grid": "-60,-50,-40,-35,-30,-25,-20",
        "mixing_variance_db_grid": "-40,-30,-20,-10,0,10",
        "sigma_sq_db_grid": "-40,-35,-30,-25,-20,-15,-10,-5,0",
        "sigma_sweep_inrbar_db_grid": "30,60,90,120",
        "taylor_sll_db": "25",
    },
    "output": {
        "directory": "out",
    },
}


def _parse_float(raw: str, key: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"key {key}: expected a number, got {raw!r}") from exc


def _parse_int(raw: str, key: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"key {key}: expected an integer, got {raw!r}") from exc


def _parse_bool(raw: str, key: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"key {key}: expected a boolean, got {raw!r}")


def _parse_float_list(raw: str, key: str) -> list[float]:
    items = [tok.strip() for tok in raw.split(",") if tok.strip()]
    if not items:
        raise ConfigError(f"key {key}: expected a comma-separated list of numbers")
    return [_parse_float(tok, key) for tok in items]


@dataclass
class ExperimentConfig:
    """Fully-resolved experiment configuration plus its echoable raw form."""

    layout: ArrayPairLayout
    tx_grid: tuple[Direction, ...]
    rx_grid: tuple[Direction, ...]
    quantization: QuantizationSpec
    budget: LinkBudget
    channel_kind: str
    mixing_variance: float
    error_variance: float
    solver: SolverConfig
    sim: SimConfig
    lonestar_specs: tuple[QuantizationSpec, ...]
    sweep_grids: dict[str, list[float]]
    taylor_sll_db: float
    tune: bool
    output_dir: str
    raw: configparser.ConfigParser

    def sweep_context(self, workers: int = 1) -> SweepContext:
        return SweepContext(
            layout=self.layout,
            tx_grid=self.tx_grid,
            rx_grid=self.rx_grid,
            lonestar_specs=self.lonestar_specs,
            baseline_spec=QuantizationSpec(
                phase_bits=8,
                amplitude_bits=8,
                attenuation_step_db=self.quantization.attenuation_step_db,
            ),
            solver=self.solver,
            tune=self.tune,
            taylor_sll_db=self.taylor_sll_db,
            workers=workers,
        )


def _effective_parser(path: str | None) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    parser.read_dict(DEFAULTS)
    if path is not None:
        loaded = configparser.ConfigParser()
        try:
            with open(path, "r", encoding="utf-8") as fh:
                loaded.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
        for section in loaded.sections():
            if section not in DEFAULTS:
                raise ConfigError(f"unknown config section [{section}]")
            for key, value in loaded.items(section):
                if key not in DEFAULTS[section]:
                    raise ConfigError(f"unknown key {section}.{key}")
                parser.set(section, key, value)
    return parser


def _coverage_grid(parser, prefix: str) -> tuple[Direction, ...]:
    az_min = _parse_float(parser["coverage"]["az_min_deg"], "coverage.az_min_deg")
    az_max = _parse_float(parser["coverage"]["az_max_deg"], "coverage.az_max_deg")
    az_step = _parse_float(parser["coverage"]["az_step_deg"], "coverage.az_step_deg")
    el_min = _parse_float(parser["coverage"]["el_min_deg"], "coverage.el_min_deg")
    el_max = _parse_float(parser["coverage"]["el_max_deg"], "coverage.el_max_deg")
    el_step = _parse_float(parser["coverage"]["el_step_deg"], "coverage.el_step_deg")
    if az_step <= 0 or el_step <= 0:
        raise ConfigError("key coverage.az_step_deg/el_step_deg: steps must be positive")
    azimuths = np.arange(az_min, az_max + 1e-9, az_step)
    elevations = np.arange(el_min, el_max + 1e-9, el_step)
    return tuple(
        Direction.from_degrees(float(az), float(el)) for el in elevations for az in azimuths
    )


def load_config(path: str | None) -> ExperimentConfig:
    """Parse the config file over the embedded defaults; raise ConfigError
    naming the offending key on any problem."""
    parser = _effective_parser(path)

    rows = _parse_int(parser["array"]["rows"], "array.rows")
    cols = _parse_int(parser["array"]["cols"], "array.cols")
    spacing = _parse_float(
        parser["array"]["element_spacing_wavelengths"], "array.element_spacing_wavelengths"
    )
    separation = _parse_float(
        parser["array"]["vertical_separation_wavelengths"],
        "array.vertical_separation_wavelengths",
    )
    try:
        layout = stacked_pair(rows, cols, spacing, separation)
    except ValueError as exc:
        raise ConfigError(f"section [array]: {exc}") from exc

    grid = _coverage_grid(parser, "coverage")
    if not grid:
        raise ConfigError("section [coverage]: empty coverage grid")

    quant = QuantizationSpec(
        phase_bits=_parse_int(parser["quantization"]["phase_bits"], "quantization.phase_bits"),
        amplitude_bits=_parse_int(
            parser["quantization"]["amplitude_bits"], "quantization.amplitude_bits"
        ),
        attenuation_step_db=_parse_float(
            parser["quantization"]["attenuation_step_db"], "quantization.attenuation_step_db"
        ),
        infinite_resolution=_parse_bool(
            parser["quantization"]["infinite_resolution"], "quantization.infinite_resolution"
        ),
    )

    budget = LinkBudget(
        snrbar_tx_db=_parse_float(parser["budget"]["snrbar_tx_db"], "budget.snrbar_tx_db"),
        snrbar_rx_db=_parse_float(parser["budget"]["snrbar_rx_db"], "budget.snrbar_rx_db"),
        inrbar_rx_db=_parse_float(parser["budget"]["inrbar_rx_db"], "budget.inrbar_rx_db"),
        inr_tx_db=_parse_float(parser["budget"]["inr_tx_db"], "budget.inr_tx_db"),
    )

    kind = parser["channel"]["kind"].strip().lower()
    if kind not in ("spherical", "mixture"):
        raise ConfigError(f"key channel.kind: expected spherical|mixture, got {kind!r}")

    solver = SolverConfig(
        sigma_tx_sq=db_to_linear(
            _parse_float(parser["solver"]["sigma_tx_sq_db"], "solver.sigma_tx_sq_db")
        ),
        sigma_rx_sq=db_to_linear(
            _parse_float(parser["solver"]["sigma_rx_sq_db"], "solver.sigma_rx_sq_db")
        ),
        am_passes=_parse_int(parser["solver"]["am_passes"], "solver.am_passes"),
        subproblem_tolerance=_parse_float(
            parser["solver"]["subproblem_tolerance"], "solver.subproblem_tolerance"
        ),
        subproblem_max_iters=_parse_int(
            parser["solver"]["subproblem_max_iters"], "solver.subproblem_max_iters"
        ),
        dual_bisection_tolerance=_parse_float(
            parser["solver"]["dual_bisection_tolerance"], "solver.dual_bisection_tolerance"
        ),
    )

    sigma_grid_db = _parse_float_list(parser["sim"]["sigma_grid_db"], "sim.sigma_grid_db")
    sim_cfg = SimConfig(
        num_user_pairs=_parse_int(parser["sim"]["num_user_pairs"], "sim.num_user_pairs"),
        master_seed=_parse_int(parser["sim"]["master_seed"], "sim.master_seed"),
        user_az_bounds=(
            np.deg2rad(_parse_float(parser["sim"]["user_az_min_deg"], "sim.user_az_min_deg")),
            np.deg2rad(_parse_float(parser["sim"]["user_az_max_deg"], "sim.user_az_max_deg")),
        ),
        user_el_bounds=(
            np.deg2rad(_parse_float(parser["sim"]["user_el_min_deg"], "sim.user_el_min_deg")),
            np.deg2rad(_parse_float(parser["sim"]["user_el_max_deg"], "sim.user_el_max_deg")),
        ),
        budget=budget,
        sigma_grid=tuple((db_to_linear(db), db_to_linear(db)) for db in sigma_grid_db),
    )

    specs = []
    for tok in parser["sweep"]["lonestar_bits"].split(","):
        tok = tok.strip()
        if not tok:
            continue
        if tok.lower() in ("inf", "infinite"):
            specs.append(
                QuantizationSpec(
                    infinite_resolution=True,
                    attenuation_step_db=quant.attenuation_step_db,
                )
            )
        else:
            bits = _parse_int(tok, "sweep.lonestar_bits")
            specs.append(
                QuantizationSpec(
                    phase_bits=bits,
                    amplitude_bits=bits,
                    attenuation_step_db=quant.attenuation_step_db,
                )
            )
    if not specs:
        raise ConfigError("key sweep.lonestar_bits: expected at least one entry")

    grids = {
        key: _parse_float_list(parser["sweep"][key], f"sweep.{key}")
        for key in (
            "snrbar_db_grid",
            "inrbar_rx_db_grid",
            "snrbar_tx_db_grid",
            "snrbar_rx_db_grid",
            "inr_tx_db_grid",
            "error_variance_db_grid",
            "mixing_variance_db_grid",
            "sigma_sq_db_grid",
            "sigma_sweep_inrbar_db_grid",
        )
    }

    return ExperimentConfig(
        layout=layout,
        tx_grid=grid,
        rx_grid=grid,
        quantization=quant,
        budget=budget,
        channel_kind=kind,
        mixing_variance=db_to_linear(
            _parse_float(parser["channel"]["mixing_variance_db"], "channel.mixing_variance_db")
        ),
        error_variance=db_to_linear(
            _parse_float(parser["channel"]["error_variance_db"], "channel.error_variance_db")
        ),
        solver=solver,
        sim=sim_cfg,
        lonestar_specs=tuple(specs),
        sweep_grids=grids,
        taylor_sll_db=_parse_float(parser["sweep"]["taylor_sll_db"], "sweep.taylor_sll_db"),
        tune=_parse_bool(parser["sim"]["tune_sigma"], "sim.tune_sigma"),
        output_dir=parser["output"]["directory"],
        raw=parser,
    )


def echo_config(cfg: ExperimentConfig) -> str:
    """Serialized effective configuration (defaults applied), re-loadable."""
    lines = []
    for section in DEFAULTS:
        lines.append(f"[{section}]")
        for key in DEFAULTS[section]:
            lines.append(f"{key} = {cfg.raw[section][key]}")
        lines.append("")
    return "\n".join(lines)
