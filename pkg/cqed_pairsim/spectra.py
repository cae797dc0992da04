from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import NumericalError
from .model import ModelParams, build_counter_rotating, build_rotating, build_static
from .qops import Eigensystem, HilbertSpace, Operator, StateVector, basis_state, eigh

logger = logging.getLogger("cqed_pairsim.spectra")

# zero-based, counted from the ground state psi_0
LOWER, UPPER = 3, 4
MIN_LEVELS = UPPER + 1
DEFAULT_BRACKET = (3.8, 4.2)
DEFAULT_XTOL = 1e-7


class AblationVariant(str, Enum):
    FULL = "full"
    DROP_HCR = "drop_HCR"
    DROP_HR = "drop_HR"


class OverlapProbabilities(NamedTuple):
    P1: float
    P2: float
    Ps_plus: float
    Ps_minus: float


@dataclass(frozen=True)
class SpectrumScanPoint:
    delta1: float
    energies: Tuple[float, ...]
    P1: float
    P2: float
    Ps_plus: float
    Ps_minus: float
    P1_prime: float
    P2_prime: float
    gap: float


@dataclass(frozen=True)
class InterferencePoint:
    ratio: float
    delta1_star: float
    gap: float


def variant_hamiltonian(p: ModelParams, variant: AblationVariant = AblationVariant.FULL) -> Operator:
    variant = AblationVariant(variant)
    h = build_static(p)
    if variant is AblationVariant.DROP_HCR:
        return h - build_counter_rotating(p)
    if variant is AblationVariant.DROP_HR:
        return h - build_rotating(p)
    return h


def pair_states(space: HilbertSpace) -> Tuple[StateVector, StateVector]:
    """|S+> and |S-> = (|0,e,e> +/- |1,g,g>)/sqrt(2)."""
    ee = basis_state(space, 0, "e", "e")
    gg = basis_state(space, 1, "g", "g")
    return (ee + gg) * (1 / math.sqrt(2.0)), (ee - gg) * (1 / math.sqrt(2.0))


def _require_levels(eig: Eigensystem) -> None:
    if len(eig) < MIN_LEVELS:
        raise ValueError(
            f"overlap diagnostics need at least {MIN_LEVELS} eigenpairs (psi_0..psi_{UPPER}), got {len(eig)}"
        )


def overlap_probabilities(eig: Eigensystem, space: HilbertSpace) -> OverlapProbabilities:
    _require_levels(eig)
    psi3, psi4 = eig.state(LOWER), eig.state(UPPER)
    s_plus, s_minus = pair_states(space)
    return OverlapProbabilities(
        P1=basis_state(space, 0, "e", "e").probability(psi4),
        P2=basis_state(space, 1, "g", "g").probability(psi4),
        Ps_plus=s_plus.probability(psi3),
        Ps_minus=s_minus.probability(psi4),
    )


def primed_overlaps(eig: Eigensystem, space: HilbertSpace) -> Tuple[float, float]:
    """(|<0,e,e|psi_3>|^2, |<1,g,g|psi_3>|^2)."""
    _require_levels(eig)
    psi3 = eig.state(LOWER)
    return (
        basis_state(space, 0, "e", "e").probability(psi3),
        basis_state(space, 1, "g", "g").probability(psi3),
    )


def scan_delta1(
    p: ModelParams,
    grid: Sequence[float],
    variant: AblationVariant = AblationVariant.FULL,
    k: int = 6,
) -> List[SpectrumScanPoint]:
    grid = [float(x) for x in grid]
    if not grid:
        raise ValueError("scan_delta1 needs a non-empty delta1 grid")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("scan_delta1 grid must be sorted ascending")
    if not MIN_LEVELS <= k <= p.space.dim:
        raise ValueError(f"k={k} outside [{MIN_LEVELS}, dim={p.space.dim}]")

    variant = AblationVariant(variant)
    logger.debug("Scanning %d delta1 points (variant=%s, k=%d)", len(grid), variant.value, k)
    points: List[SpectrumScanPoint] = []
    for delta1 in grid:
        q = p.with_changes(delta1=delta1)
        eig = eigh(variant_hamiltonian(q, variant))
        probs = overlap_probabilities(eig, q.space)
        p1_prime, p2_prime = primed_overlaps(eig, q.space)
        points.append(
            SpectrumScanPoint(
                delta1=delta1,
                energies=tuple(float(e) for e in eig.values[:k]),
                P1=probs.P1,
                P2=probs.P2,
                Ps_plus=probs.Ps_plus,
                Ps_minus=probs.Ps_minus,
                P1_prime=p1_prime,
                P2_prime=p2_prime,
                gap=float(eig.values[UPPER] - eig.values[LOWER]),
            )
        )
    return points


def anticrossing_gap(
    p: ModelParams, delta1: float, variant: AblationVariant = AblationVariant.FULL
) -> float:
    values = eigh(variant_hamiltonian(p.with_changes(delta1=delta1), variant)).values
    return float(values[UPPER] - values[LOWER])


def _minimize(fn, bracket: Tuple[float, float], xtol: float, what: str) -> Tuple[float, float]:
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise ValueError(f"{what}: bracket must satisfy lo < hi, got ({lo}, {hi})")
    res = minimize_scalar(fn, bounds=(lo, hi), method="bounded", options={"xatol": xtol})
    if not res.success:
        raise NumericalError(f"{what}: minimizer did not converge: {res.message}")
    logger.debug("%s: minimum %.6g at delta1=%.9f after %d evaluations", what, res.fun, res.x, res.nfev)
    return float(res.x), float(res.fun)


def min_gap(
    p: ModelParams,
    bracket: Tuple[float, float] = DEFAULT_BRACKET,
    variant: AblationVariant = AblationVariant.FULL,
    xtol: float = DEFAULT_XTOL,
) -> Tuple[float, float]:
    """Locate the psi_3/psi_4 anticrossing inside `bracket`; returns (delta1_star, gap_star).

    Bounded Brent search: golden-section steps with parabolic acceleration.
    """
    return _minimize(lambda d: anticrossing_gap(p, d, variant), bracket, xtol, "min_gap")


def interference_scan(
    p: ModelParams,
    ratios: Sequence[float],
    bracket: Tuple[float, float] = DEFAULT_BRACKET,
    xtol: float = DEFAULT_XTOL,
) -> List[InterferencePoint]:
    if p.g1 == 0:
        raise ValueError("interference_scan needs g1 != 0 (g2 is set to ratio * g1)")
    ratios = [float(r) for r in ratios]
    if not ratios:
        raise ValueError("interference_scan needs at least one ratio")
    out: List[InterferencePoint] = []
    for ratio in ratios:
        delta1_star, gap = min_gap(p.with_changes(g2=ratio * p.g1), bracket, xtol=xtol)
        out.append(InterferencePoint(ratio=ratio, delta1_star=delta1_star, gap=gap))
    return out


def resonant_pair_gap(p: ModelParams, n: int, delta1: float) -> float:
    """Splitting of the two eigenstates carrying most of |0,e,e> and |n,g,g> at `delta1`."""
    q = p.with_changes(delta1=delta1)
    space = q.space
    eig = eigh(build_static(q))
    ee = basis_state(space, 0, "e", "e").amplitudes
    gg = basis_state(space, n, "g", "g").amplitudes
    weights = np.abs(ee.conj() @ eig.vectors) ** 2 + np.abs(gg.conj() @ eig.vectors) ** 2
    top = np.argsort(weights)[-2:]
    return float(abs(eig.values[top[1]] - eig.values[top[0]]))


def multiphoton_gap(p: ModelParams, n: int, half_width: float = 0.02, xtol: float = 1e-8) -> Tuple[float, float]:
    """Minimal |0,e,e> / |n,g,g> splitting near delta1 = n*omega - delta2."""
    if not 1 <= n <= p.n_max:
        raise ValueError(f"photon order n={n} outside [1, n_max={p.n_max}]")
    centre = n * p.omega - p.delta2
    if centre - half_width <= 0:
        raise ValueError(f"n={n} resonance at delta1={centre} is not reachable with positive delta1")
    bracket = (centre - half_width, centre + half_width)
    return _minimize(lambda d: resonant_pair_gap(p, n, d), bracket, xtol, f"multiphoton_gap(n={n})")
