"""Experiment runners: one validated ExperimentConfig in, CSV tables out."""

from __future__ import annotations

import logging
from typing import Callable, Dict, List, Sequence

import numpy as np

from .config import ExperimentConfig
from .dynamics import fock_convergence, initial_state, lindblad_evolve, lz_probability, lz_sweep
from .errors import ConfigError, NumericalError
from .model import ModelParams, derived
from .qops import StateVector
from .schemas import DERIVED_COLUMNS, INTERFERENCE_COLUMNS, LZ_COLUMNS, RABI_COLUMNS, spectrum_columns
from .spectra import interference_scan, scan_delta1
from .tables import CsvTable, format_cell

logger = logging.getLogger("cqed_pairsim.experiments")


def _comments(cfg: ExperimentConfig, *extra: str) -> List[str]:
    return [f"command: {cfg.command}", f"config_sha256: {cfg.digest}", *extra]


def _require(cfg: ExperimentConfig, attr: str, key: str) -> None:
    if getattr(cfg, attr) is None:
        raise ConfigError(f"{cfg.command} needs {key}", key=key)


def _prepare(p: ModelParams, label: str) -> StateVector:
    try:
        return initial_state(p, label)
    except ValueError as exc:
        raise ConfigError(f"initial.state: {exc}", key="initial.state") from exc


def run_spectrum_scan(cfg: ExperimentConfig) -> List[CsvTable]:
    _require(cfg, "delta1_grid", "scan.delta1_step_ghz")
    grid = cfg.delta1_grid.values()
    tables: List[CsvTable] = []
    for variant in cfg.variants:
        points = scan_delta1(cfg.model, grid, variant, k=cfg.levels)
        table = CsvTable(
            columns=spectrum_columns(cfg.levels),
            comments=_comments(cfg, f"variant: {variant.value}"),
            name=variant.value,
        )
        for pt in points:
            table.append(
                [pt.delta1, *pt.energies, pt.gap, pt.P1, pt.P2, pt.Ps_plus, pt.Ps_minus, pt.P1_prime, pt.P2_prime, variant.value]
            )
        best = min(points, key=lambda pt: pt.gap)
        logger.info(
            "spectrum-scan %s: %d points, smallest gap %.6g GHz at delta1=%.4f GHz",
            variant.value,
            len(points),
            best.gap,
            best.delta1,
        )
        tables.append(table)
    return tables


def run_lz(cfg: ExperimentConfig) -> CsvTable:
    _require(cfg, "sweep", "sweep.v_ghz2")
    p, sweep, it = cfg.model, cfg.sweep, cfg.integrator
    psi0 = _prepare(p.with_changes(delta1=sweep.delta1_0), cfg.initial_state)
    trace = lz_sweep(
        p,
        sweep,
        psi0,
        cfg.time_grid.values(),
        tol=it.rtol,
        atol=it.atol,
        method=it.method,
        max_steps=it.max_steps,
    )
    predicted = lz_probability(derived(p).Gs, sweep.v)
    logger.info(
        "lz: final P_0ee=%.4f, jump probability %.4g (formula %.4g)",
        trace.p_0ee[-1],
        trace.jump_probability,
        predicted,
    )
    table = CsvTable(
        columns=list(LZ_COLUMNS),
        comments=_comments(
            cfg,
            f"jump_probability: {format_cell(trace.jump_probability)}",
            f"lz_formula_probability: {format_cell(predicted)}",
        ),
    )
    for row in zip(trace.times, trace.p_1gg, trace.p_0ee, trace.delta1, trace.p_psi3, trace.p_psi4):
        table.append(row)
    return table


def run_rabi(cfg: ExperimentConfig) -> CsvTable:
    _require(cfg, "time_grid", "time.stop_ns")
    p, it = cfg.model, cfg.integrator
    t = cfg.time_grid.values()
    kwargs = dict(tol=it.rtol, atol=it.atol, method=it.method, max_steps=it.max_steps)
    trace = lindblad_evolve(p, cfg.pulse, _prepare(p, cfg.initial_state), t, **kwargs)

    if it.truncation_check:
        check = fock_convergence(p, cfg.pulse, cfg.initial_state, t, reference=trace, **kwargs)
        if not check.converged:
            logger.error(
                "Fock truncation n_max=%d not converged: d(max gq2)=%.3g, d(max photon)=%.3g",
                check.n_max,
                check.delta_gq2,
                check.delta_photon,
            )
            raise NumericalError(
                f"Fock truncation n_max={check.n_max} not converged against n_max={check.n_max_check} "
                f"(d gq2 {check.delta_gq2:.3g}, d photon {check.delta_photon:.3g}, tolerance {check.tolerance:g})"
            )

    peak = int(np.argmax(trace.gq2))
    logger.info("rabi: max gq2 %.4f at t=%.1f ns, max photon number %.4f", trace.gq2[peak], t[peak], np.max(trace.photon_number))
    table = CsvTable(
        columns=list(RABI_COLUMNS),
        comments=_comments(cfg, f"max_trace_error: {format_cell(np.max(trace.trace_error))}"),
    )
    pops = trace.populations
    for row in zip(t, trace.photon_number, trace.gq2, trace.flux, pops["0gg"], pops["1gg"], pops["0ee"], trace.trace_error):
        table.append(row)
    return table


def run_interference(cfg: ExperimentConfig) -> CsvTable:
    _require(cfg, "ratio_grid", "scan.ratio_step")
    if cfg.model.g1 == 0:
        raise ConfigError("interference needs model.g1_ghz != 0", key="model.g1_ghz")
    points = interference_scan(cfg.model, cfg.ratio_grid.values(), cfg.bracket)
    table = CsvTable(columns=list(INTERFERENCE_COLUMNS), comments=_comments(cfg))
    for pt in points:
        table.append([pt.ratio, pt.delta1_star, pt.gap])
    logger.info("interference: %d ratios scanned", len(points))
    return table


def run_derived(cfg: ExperimentConfig) -> CsvTable:
    q = derived(cfg.model)
    g1, g2 = q.path_rates
    columns = list(DERIVED_COLUMNS)
    row = [q.beta1, q.beta2, q.chi, q.Gs, g1, g2, q.half_rabi_time]
    notes: List[str] = []
    if q.Gs == 0:
        # no pair exchange: the half-Rabi time has no finite value
        columns.remove("half_rabi_time_ns")
        row.pop()
        notes.append("half_rabi_time_ns: undefined (Gs = 0)")
        logger.info("derived: Gs = 0, leaving out half_rabi_time_ns")
    if cfg.sweep_rate is not None:
        columns.append("adiabaticity")
        row.append(q.adiabaticity(cfg.sweep_rate))
    table = CsvTable(columns=columns, comments=_comments(cfg, *notes))
    table.append(row)
    return table


def run_experiment(cfg: ExperimentConfig) -> List[CsvTable]:
    result = RUNNERS[cfg.command](cfg)
    return list(result) if isinstance(result, Sequence) else [result]


RUNNERS: Dict[str, Callable[[ExperimentConfig], object]] = {
    "spectrum-scan": run_spectrum_scan,
    "lz": run_lz,
    "rabi": run_rabi,
    "interference": run_interference,
    "derived": run_derived,
}
