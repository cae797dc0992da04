"""Closed and open time evolution.

Closed systems are propagated either with scipy's embedded Runge-Kutta pairs
(RK45, DOP853) or with an adaptive exponential-midpoint scheme ("magnus")
whose step size is controlled by step doubling. The latter is exact for
static Hamiltonians and handles slow parameter sweeps in few steps.

Open systems follow the Lindblad equation with jump operators taken from the
positive-frequency parts of a + a^dag and sigma_x^j in the eigenbasis of the
undriven Hamiltonian. Jump operators stay fixed while the drive is on.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg as la
from scipy.integrate import solve_ivp

from .errors import IntegrationError
from .model import DrivePulse, ModelParams, _operators, build_static, drive_matrix
from .qops import (
    DensityMatrix,
    Eigensystem,
    Operator,
    StateVector,
    basis_state,
    eigh,
    labelled_state,
)

logger = logging.getLogger("cqed_pairsim.dynamics")

DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-10
DEFAULT_MAX_STEPS = 5_000_000
# right-hand-side evaluations per accepted step
_STAGES = {"RK45": 6, "DOP853": 12, "RK23": 3}
MAGNUS = "magnus"
CLOSED_METHODS = tuple(_STAGES) + (MAGNUS,)
OPEN_METHODS = tuple(_STAGES)

TRACKED_POPULATIONS = ("0gg", "1gg", "0ee")
FOCK_CONVERGENCE_TOL = 1e-4

_PSI_RE = re.compile(r"^psi_?(\d+)$")


@dataclass(frozen=True)
class SweepSpec:
    """Linear ramp delta1(t) = delta1_0 + v t over [0, t_end]."""

    delta1_0: float
    v: float
    t_end: float

    def __post_init__(self) -> None:
        if self.t_end < 0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        for t in (0.0, self.t_end):
            if not self.delta1_at(t) > 0:
                raise ValueError(
                    f"delta1(t) = {self.delta1_0} + {self.v}*t must stay positive; "
                    f"delta1({t}) = {self.delta1_at(t)}"
                )

    def delta1_at(self, t):
        return self.delta1_0 + self.v * np.asarray(t)


@dataclass(frozen=True, eq=False)
class TimeDependentHamiltonian:
    """static + sum_k coeff_k(t) * op_k."""

    static: Operator
    terms: Tuple[Tuple[Operator, Callable[[float], complex]], ...] = ()

    def matrix_at(self, t: float) -> np.ndarray:
        m = self.static.entries
        for op, coeff in self.terms:
            m = m + coeff(t) * op.entries
        return m

    def at(self, t: float) -> Operator:
        return Operator(self.static.space, self.matrix_at(t))


HamiltonianLike = Union[Operator, TimeDependentHamiltonian, Callable[[float], Operator]]


@dataclass(frozen=True, eq=False)
class DressedOperatorPair:
    plus: Operator
    minus: Operator
    diagonal_part: Operator


@dataclass
class SweepTrace:
    times: np.ndarray
    delta1: np.ndarray
    p_1gg: np.ndarray
    p_0ee: np.ndarray
    p_psi3: np.ndarray
    p_psi4: np.ndarray
    final_state: StateVector

    @property
    def jump_probability(self) -> float:
        """Population left in the lower adiabatic branch psi_3 at the end of the sweep."""
        return float(self.p_psi3[-1])


@dataclass
class ObservableTrace:
    times: np.ndarray
    photon_number: np.ndarray
    gq2: np.ndarray
    flux: np.ndarray
    populations: Dict[str, np.ndarray]
    trace_error: np.ndarray
    hermiticity_error: np.ndarray
    min_eigenvalue: np.ndarray
    final_state: DensityMatrix


@dataclass(frozen=True)
class FockConvergence:
    n_max: int
    n_max_check: int
    delta_gq2: float
    delta_photon: float
    tolerance: float = FOCK_CONVERGENCE_TOL

    @property
    def converged(self) -> bool:
        return self.delta_gq2 < self.tolerance and self.delta_photon < self.tolerance


# dressed operators ----------------------------------------------------------


def dressed_decomposition(eig: Eigensystem, bare: Operator) -> DressedOperatorPair:
    """Split `bare` into parts that lower (plus), raise (minus) or keep the energy index."""
    eig.space.check_same(bare.space, "dressed_decomposition")
    if len(eig) != eig.space.dim:
        raise ValueError(
            f"dressed_decomposition needs a complete eigensystem ({eig.space.dim} pairs), got {len(eig)}"
        )
    v = eig.vectors
    elements = eig.to_eigenbasis(bare)
    upper = np.triu(elements, k=1)
    diag = np.diag(np.diag(elements))
    plus = Operator(bare.space, v @ upper @ v.conj().T)
    return DressedOperatorPair(
        plus=plus,
        minus=plus.dag(),
        diagonal_part=Operator(bare.space, v @ diag @ v.conj().T),
    )


# integration ----------------------------------------------------------------


class _BudgetExceeded(Exception):
    def __init__(self, t: float) -> None:
        super().__init__(t)
        self.t = t


def _check_grid(t_grid: Sequence[float]) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("time grid must be a non-empty 1-D sequence")
    if np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return t


def _integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    t: np.ndarray,
    *,
    method: str,
    rtol: float,
    atol: float,
    max_steps: int,
    what: str,
) -> np.ndarray:
    """solve_ivp on a complex state with an RHS-evaluation budget; returns one row per grid time."""
    if method not in _STAGES:
        raise ValueError(f"unknown integrator method {method!r}; expected one of {tuple(_STAGES)}")
    if t.size == 1:
        return y0[np.newaxis, :]

    budget = max_steps * _STAGES[method]
    calls = 0

    def counted(tt: float, y: np.ndarray) -> np.ndarray:
        nonlocal calls
        calls += 1
        if calls > budget:
            raise _BudgetExceeded(tt)
        return rhs(tt, y)

    try:
        sol = solve_ivp(
            counted,
            (t[0], t[-1]),
            y0,
            method=method,
            t_eval=t,
            rtol=rtol,
            atol=atol,
        )
    except _BudgetExceeded as exc:
        raise IntegrationError(f"{what}: step budget of {max_steps} steps exhausted", exc.t) from None

    if sol.status < 0 or sol.y.shape[1] != t.size:
        reached = float(sol.t[-1]) if sol.t.size else float(t[0])
        raise IntegrationError(f"{what}: {sol.message}", reached)
    y = sol.y.T
    finite = np.all(np.isfinite(y), axis=1)
    if not finite.all():
        raise IntegrationError(f"{what}: state became non-finite", float(t[np.argmin(finite)]))
    logger.debug("%s: %d RHS evaluations (%s)", what, sol.nfev, method)
    return y


def _magnus(
    h_of_t: Callable[[float], np.ndarray],
    psi0: np.ndarray,
    t: np.ndarray,
    *,
    rtol: float,
    atol: float,
    max_steps: int,
    what: str,
) -> np.ndarray:
    out = np.empty((t.size, psi0.size), dtype=complex)
    out[0] = psi0
    psi = psi0
    now = float(t[0])
    dt = float(t[1] - t[0]) if t.size > 1 else 0.0
    steps = 0
    for i, target in enumerate(t[1:], start=1):
        while target - now > 1e-12 * max(1.0, abs(target)):
            h = min(dt, target - now)
            full = la.expm(-1j * h * h_of_t(now + 0.5 * h)) @ psi
            mid = la.expm(-0.5j * h * h_of_t(now + 0.25 * h)) @ psi
            half = la.expm(-0.5j * h * h_of_t(now + 0.75 * h)) @ mid
            steps += 1
            if steps > max_steps:
                raise IntegrationError(f"{what}: step budget of {max_steps} steps exhausted", now)
            err = float(np.max(np.abs(half - full)))
            scale = atol + rtol * float(np.max(np.abs(half)))
            if not math.isfinite(err):
                raise IntegrationError(f"{what}: state became non-finite", now)
            if err <= scale:
                now += h
                psi = half
            factor = 4.0 if err == 0 else min(4.0, max(0.2, 0.9 * (scale / err) ** (1.0 / 3.0)))
            dt = h * factor
            if dt < 1e-14 * max(1.0, abs(now)):
                raise IntegrationError(f"{what}: step size underflow", now)
        now = float(target)
        out[i] = psi
    logger.debug("%s: %d exponential-midpoint steps", what, steps)
    return out


def _hamiltonian_fn(h: HamiltonianLike) -> Callable[[float], np.ndarray]:
    if isinstance(h, Operator):
        m = h.entries
        return lambda _t: m
    if isinstance(h, TimeDependentHamiltonian):
        return h.matrix_at
    if callable(h):

        def evaluate(t: float) -> np.ndarray:
            m = h(t)
            return m.entries if isinstance(m, Operator) else np.asarray(m, dtype=complex)

        return evaluate
    raise TypeError(f"unsupported Hamiltonian type {type(h).__name__}")


def schrodinger_evolve(
    h: HamiltonianLike,
    psi0: StateVector,
    t_grid: Sequence[float],
    tol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    method: str = MAGNUS,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> List[StateVector]:
    """Solve i d|psi>/dt = H(t)|psi> and return the state at every grid time.

    The default `magnus` propagator is unitary step by step. The Runge-Kutta
    methods drift in norm roughly in proportion to `tol`; they need
    tol <= 1e-10 to hold the norm to 1e-8 over a few hundred ns.
    """
    if abs(psi0.norm() - 1.0) > 1e-9:
        raise ValueError(f"psi0 must be normalized, norm={psi0.norm():.12f}")
    t = _check_grid(t_grid)
    h_of_t = _hamiltonian_fn(h)
    y0 = np.array(psi0.amplitudes)

    if method == MAGNUS:
        ys = (
            y0[np.newaxis, :]
            if t.size == 1
            else _magnus(h_of_t, y0, t, rtol=tol, atol=atol, max_steps=max_steps, what="schrodinger")
        )
    else:
        ys = _integrate(
            lambda tt, y: -1j * (h_of_t(tt) @ y),
            y0,
            t,
            method=method,
            rtol=tol,
            atol=atol,
            max_steps=max_steps,
            what="schrodinger",
        )
    return [StateVector(psi0.space, y) for y in ys]


# Landau-Zener ---------------------------------------------------------------


def lz_hamiltonian(p: ModelParams, sweep: SweepSpec) -> TimeDependentHamiltonian:
    ops = _operators(p.n_max)
    h0 = build_static(p.with_changes(delta1=sweep.delta1_0))
    # constant offset only changes the global phase
    offset = 0.5 * (sweep.delta1_0 + p.delta2)
    return TimeDependentHamiltonian(
        static=h0 - offset * ops.eye,
        terms=((0.5 * ops.sz1, lambda t: sweep.v * t),),
    )


def lz_sweep(
    p: ModelParams,
    sweep: SweepSpec,
    psi0: StateVector,
    t_grid: Sequence[float],
    tol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    method: str = MAGNUS,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> SweepTrace:
    t = _check_grid(t_grid)
    if t[0] < 0 or t[-1] > sweep.t_end + 1e-9:
        raise ValueError(f"sweep time grid must lie within [0, {sweep.t_end}] ns")
    logger.info(
        "LZ sweep: delta1 %.4f -> %.4f GHz, v=%.3g GHz^2, %d samples",
        sweep.delta1_0,
        float(sweep.delta1_at(t[-1])),
        sweep.v,
        t.size,
    )
    states = schrodinger_evolve(lz_hamiltonian(p, sweep), psi0, t, tol, atol, method, max_steps)

    space = p.space
    gg = basis_state(space, 1, "g", "g")
    ee = basis_state(space, 0, "e", "e")
    delta1 = np.asarray(sweep.delta1_at(t), dtype=float)
    p_psi3 = np.empty(t.size)
    p_psi4 = np.empty(t.size)
    for i, (d1, psi) in enumerate(zip(delta1, states)):
        eig = eigh(build_static(p.with_changes(delta1=float(d1))))
        p_psi3[i] = eig.state(3).probability(psi)
        p_psi4[i] = eig.state(4).probability(psi)
    return SweepTrace(
        times=t,
        delta1=delta1,
        p_1gg=np.array([gg.probability(s) for s in states]),
        p_0ee=np.array([ee.probability(s) for s in states]),
        p_psi3=p_psi3,
        p_psi4=p_psi4,
        final_state=states[-1],
    )


def lz_probability(Gs: float, v: float) -> float:
    """exp(-2 pi Gs^2 / v): chance of the diabatic jump into psi_3."""
    if not v > 0:
        raise ValueError(f"sweep rate v must be > 0, got {v}")
    return math.exp(-2.0 * math.pi * Gs**2 / v)


# master equation ------------------------------------------------------------


def initial_state(p: ModelParams, label: str = "ground") -> StateVector:
    """'ground' or 'psiK' select eigenstates of build_static(p); anything else is a bare label like '1gg'."""
    key = label.strip().lower()
    if key == "ground":
        key = "psi0"
    match = _PSI_RE.match(key)
    if match:
        k = int(match.group(1))
        if k >= p.space.dim:
            raise ValueError(f"eigenstate index {k} outside [0, {p.space.dim})")
        return eigh(build_static(p)).state(k)
    return labelled_state(p.space, key)


def expectation(rho: DensityMatrix, op: Operator) -> complex:
    rho.space.check_same(op.space, "expectation")
    return complex(np.sum(rho.entries * op.entries.T))


def _as_density(p: ModelParams, initial: Union[StateVector, DensityMatrix]) -> DensityMatrix:
    rho = DensityMatrix.from_state(initial) if isinstance(initial, StateVector) else initial
    p.space.check_same(rho.space, "lindblad_evolve initial state")
    rho.validate_physical(1e-10)
    return rho


def lindblad_evolve(
    p: ModelParams,
    pulse: Optional[DrivePulse],
    initial: Union[StateVector, DensityMatrix],
    t_grid: Sequence[float],
    tol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    method: str = "RK45",
    max_steps: int = DEFAULT_MAX_STEPS,
) -> ObservableTrace:
    t = _check_grid(t_grid)
    rho0 = _as_density(p, initial)
    space = p.space
    d = space.dim
    ops = _operators(p.n_max)

    h0 = build_static(p)
    eig = eigh(h0)
    x = dressed_decomposition(eig, ops.x)
    c1 = dressed_decomposition(eig, ops.sx1)
    c2 = dressed_decomposition(eig, ops.sx2)

    jumps = [
        (rate, op.plus.entries)
        for rate, op in ((p.kappa, x), (p.gamma1, c1), (p.gamma2, c2))
        if rate > 0
    ]
    h_eff = np.array(h0.entries)
    for rate, op in jumps:
        h_eff = h_eff - 0.5j * rate * (op.conj().T @ op)
    h_eff_dag = h_eff.conj().T
    scaled = [(rate, op, op.conj().T) for rate, op in jumps]
    driven = pulse is not None and pulse.amplitude_area != 0

    def rhs(tt: float, y: np.ndarray) -> np.ndarray:
        rho = y.reshape(d, d)
        if driven:
            hd = drive_matrix(tt, pulse, p.n_max)
            out = -1j * ((h_eff + hd) @ rho - rho @ (h_eff_dag + hd))
        else:
            out = -1j * (h_eff @ rho - rho @ h_eff_dag)
        for rate, op, op_dag in scaled:
            out = out + rate * (op @ rho @ op_dag)
        return out.reshape(-1)

    logger.info(
        "Lindblad run: dim=%d, %d samples over [%.3g, %.3g] ns, %d jump operators, drive=%s",
        d,
        t.size,
        t[0],
        t[-1],
        len(jumps),
        "on" if driven else "off",
    )
    ys = _integrate(
        rhs,
        np.array(rho0.entries).reshape(-1),
        t,
        method=method,
        rtol=tol,
        atol=atol,
        max_steps=max_steps,
        what="lindblad",
    )

    photon_op = (x.minus @ x.plus).entries
    gq2_op = (c1.minus @ c2.minus @ c2.plus @ c1.plus).entries
    tracked = {label: labelled_state(space, label).amplitudes for label in TRACKED_POPULATIONS}

    n = t.size
    photon = np.empty(n)
    gq2 = np.empty(n)
    trace_err = np.empty(n)
    herm_err = np.empty(n)
    min_eig = np.empty(n)
    pops: Dict[str, np.ndarray] = {label: np.empty(n) for label in TRACKED_POPULATIONS}
    for i, y in enumerate(ys):
        rho = y.reshape(d, d)
        photon[i] = np.real(np.sum(rho * photon_op.T))
        gq2[i] = np.real(np.sum(rho * gq2_op.T))
        trace_err[i] = abs(np.trace(rho) - 1.0)
        herm_err[i] = np.max(np.abs(rho - rho.conj().T))
        min_eig[i] = la.eigvalsh(0.5 * (rho + rho.conj().T))[0]
        for label, vec in tracked.items():
            pops[label][i] = np.real(np.vdot(vec, rho @ vec))

    return ObservableTrace(
        times=t,
        photon_number=photon,
        gq2=gq2,
        flux=p.kappa * photon,
        populations=pops,
        trace_error=trace_err,
        hermiticity_error=herm_err,
        min_eigenvalue=min_eig,
        final_state=DensityMatrix(space, ys[-1].reshape(d, d)),
    )


def fock_convergence(
    p: ModelParams,
    pulse: Optional[DrivePulse],
    initial: str,
    t_grid: Sequence[float],
    extra: int = 2,
    reference: Optional[ObservableTrace] = None,
    **kwargs,
) -> FockConvergence:
    """Repeat a Lindblad run at n_max + extra and compare the maxima of gq2 and photon number."""
    if reference is None:
        reference = lindblad_evolve(p, pulse, initial_state(p, initial), t_grid, **kwargs)
    bigger = p.with_changes(n_max=p.n_max + extra)
    check = lindblad_evolve(bigger, pulse, initial_state(bigger, initial), t_grid, **kwargs)
    result = FockConvergence(
        n_max=p.n_max,
        n_max_check=bigger.n_max,
        delta_gq2=abs(float(np.max(check.gq2)) - float(np.max(reference.gq2))),
        delta_photon=abs(float(np.max(check.photon_number)) - float(np.max(reference.photon_number))),
    )
    logger.info(
        "Fock truncation check n_max %d -> %d: d(max gq2)=%.2e, d(max photon)=%.2e",
        result.n_max,
        result.n_max_check,
        result.delta_gq2,
        result.delta_photon,
    )
    return result
