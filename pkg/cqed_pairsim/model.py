"""Hamiltonians for two longitudinally coupled qubits sharing one resonator.

All rates are angular frequencies with hbar = 1: a value of 8.0 means
8 rad/ns, and times are in ns. Nothing in this package inserts a factor of 2*pi.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import NamedTuple, Optional, Set, Tuple

import numpy as np

from .qops import (
    HilbertSpace,
    Operator,
    annihilation,
    creation,
    expm,
    identity,
    make_space,
    number,
    qubit_op,
)

logger = logging.getLogger("cqed_pairsim.model")

# g * n_max / omega above this means the displaced vacuum leaks into the top Fock levels
TRUNCATION_GUARD = 0.2

_warned_truncation: Set[Tuple[float, float, float, int]] = set()


@dataclass(frozen=True)
class ModelParams:
    omega: float = 8.0
    delta1: float = 4.0
    delta2: float = 4.0
    g1: float = 0.2
    g2: float = 0.2
    J: float = 0.1
    chi3: float = 0.0
    kappa: float = 0.0
    gamma1: float = 0.0
    gamma2: float = 0.0
    n_max: int = 5

    def __post_init__(self) -> None:
        for name in ("omega", "delta1", "delta2", "g1", "g2", "J", "chi3", "kappa", "gamma1", "gamma2"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        for name in ("omega", "delta1", "delta2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("kappa", "gamma1", "gamma2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        # HilbertSpace owns the n_max checks
        make_space(self.n_max)

    @property
    def space(self) -> HilbertSpace:
        return make_space(self.n_max)

    def with_changes(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class DrivePulse:
    """Gaussian drive A*exp(-(t-t0)^2/(2 tau^2))/(sqrt(2 pi) tau) on a + a^dag."""

    amplitude_area: float
    t0: float = 0.0
    tau: float = 20.0
    omega_d: float = 8.0

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        for name in ("amplitude_area", "t0", "omega_d"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite, got {getattr(self, name)!r}")

    @classmethod
    def from_peak(cls, peak: float, t0: float = 0.0, tau: float = 20.0, omega_d: float = 8.0) -> "DrivePulse":
        return cls(peak * math.sqrt(2.0 * math.pi) * tau, t0=t0, tau=tau, omega_d=omega_d)

    @property
    def peak_amplitude(self) -> float:
        return self.amplitude_area / (math.sqrt(2.0 * math.pi) * self.tau)

    def envelope(self, t):
        return self.peak_amplitude * np.exp(-((np.asarray(t) - self.t0) ** 2) / (2.0 * self.tau**2))


@dataclass(frozen=True)
class DeviceParams:
    R: float
    M: float
    L0: float
    L: float
    omega: float

    def __post_init__(self) -> None:
        for name in ("L0", "L", "omega"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class DerivedQuantities:
    beta1: float
    beta2: float
    chi: float
    Gs: float
    # sigma_z sigma_z coefficient left behind by the polaron transform (chi / 2)
    zz_shift: float
    J: float

    @property
    def path_rates(self) -> Tuple[float, float]:
        """Per-qubit contributions J*beta_j; Gs = 2 * (G1 + G2)."""
        return self.J * self.beta1, self.J * self.beta2

    @property
    def half_rabi_time(self) -> float:
        if self.Gs == 0:
            return math.inf
        return math.pi / (2.0 * abs(self.Gs))

    def adiabaticity(self, v: float) -> float:
        if v <= 0:
            raise ValueError(f"sweep rate v must be > 0, got {v}")
        return 2.0 * math.pi * self.Gs**2 / v


class _Ops(NamedTuple):
    a: Operator
    adag: Operator
    n: Operator
    x: Operator
    y: Operator
    kerr: Operator
    eye: Operator
    sz1: Operator
    sz2: Operator
    sx1: Operator
    sx2: Operator
    sp1: Operator
    sm1: Operator
    sp2: Operator
    sm2: Operator


@lru_cache(maxsize=16)
def _operators(n_max: int) -> _Ops:
    space = make_space(n_max)
    a = annihilation(space)
    adag = creation(space)
    return _Ops(
        a=a,
        adag=adag,
        n=number(space),
        x=a + adag,
        y=adag - a,
        kerr=adag @ adag @ a @ a,
        eye=identity(space),
        sz1=qubit_op(space, 1, "sz"),
        sz2=qubit_op(space, 2, "sz"),
        sx1=qubit_op(space, 1, "sx"),
        sx2=qubit_op(space, 2, "sx"),
        sp1=qubit_op(space, 1, "s_plus"),
        sm1=qubit_op(space, 1, "s_minus"),
        sp2=qubit_op(space, 2, "s_plus"),
        sm2=qubit_op(space, 2, "s_minus"),
    )


def _check_truncation(p: ModelParams) -> None:
    ratio = max(abs(p.g1), abs(p.g2)) * p.n_max / p.omega
    if ratio <= TRUNCATION_GUARD:
        return
    key = (p.g1, p.g2, p.omega, p.n_max)
    if key in _warned_truncation:
        return
    _warned_truncation.add(key)
    logger.warning(
        "Fock truncation may be too small: max|g|*n_max/omega = %.3f > %.2f (n_max=%d)",
        ratio,
        TRUNCATION_GUARD,
        p.n_max,
    )


def _bare(p: ModelParams, ops: _Ops) -> Operator:
    return p.omega * ops.n + (0.5 * p.delta1) * ops.sz1 + (0.5 * p.delta2) * ops.sz2


def build_static(p: ModelParams) -> Operator:
    """H_T + H_Kerr: longitudinal coupling, dipole-dipole J sx1 sx2 and chi3 a^dag^2 a^2."""
    _check_truncation(p)
    ops = _operators(p.n_max)
    h = _bare(p, ops)
    h = h + p.g1 * (ops.sz1 @ ops.x) + p.g2 * (ops.sz2 @ ops.x)
    h = h + p.J * (ops.sx1 @ ops.sx2)
    if p.chi3:
        h = h + p.chi3 * ops.kerr
    return h


def build_rotating(p: ModelParams) -> Operator:
    ops = _operators(p.n_max)
    return p.J * (ops.sm1 @ ops.sp2 + ops.sp1 @ ops.sm2)


def build_counter_rotating(p: ModelParams) -> Operator:
    ops = _operators(p.n_max)
    return p.J * (ops.sp1 @ ops.sp2 + ops.sm1 @ ops.sm2)


def drive_matrix(t: float, pulse: DrivePulse, n_max: int) -> np.ndarray:
    ops = _operators(n_max)
    phase = np.exp(1j * pulse.omega_d * t)
    return float(pulse.envelope(t)) * (ops.a.entries * phase + ops.adag.entries * np.conj(phase))


def drive_at(t: float, pulse: DrivePulse, space: HilbertSpace) -> Operator:
    return Operator(space, drive_matrix(t, pulse, space.n_max))


def coupling_from_device(d: DeviceParams) -> float:
    if d.L0 * d.L <= 0:
        raise ValueError(f"L0*L must be > 0, got L0={d.L0}, L={d.L}")
    return d.R * d.M * math.sqrt(d.omega / (2.0 * d.L0 * d.L))


def derived(p: ModelParams) -> DerivedQuantities:
    beta1 = p.g1 / p.omega
    beta2 = p.g2 / p.omega
    return DerivedQuantities(
        beta1=beta1,
        beta2=beta2,
        chi=4.0 * p.g1 * p.g2 / p.omega,
        Gs=2.0 * p.J * (beta1 + beta2),
        zz_shift=2.0 * p.g1 * p.g2 / p.omega,
        J=p.J,
    )


def _require_no_kerr(p: ModelParams, what: str) -> None:
    if p.chi3 != 0:
        raise ValueError(f"{what} is defined for chi3 = 0 only, got chi3={p.chi3}")


def polaron_generator(p: ModelParams) -> Operator:
    """S = sum_j beta_j sz_j (a^dag - a); anti-Hermitian."""
    ops = _operators(p.n_max)
    q = derived(p)
    return q.beta1 * (ops.sz1 @ ops.y) + q.beta2 * (ops.sz2 @ ops.y)


def polaron_transform(p: ModelParams) -> Operator:
    """H_s1 = e^S H_T e^-S, by exact matrix exponentials on the truncated space."""
    _require_no_kerr(p, "polaron_transform")
    s = polaron_generator(p)
    return expm(s) @ build_static(p) @ expm(-s)


def build_first_order(p: ModelParams) -> Operator:
    """First-order expansion of the polaron frame Hamiltonian in beta_j.

    The constant -(g1^2 + g2^2)/omega is dropped.
    """
    _require_no_kerr(p, "build_first_order")
    ops = _operators(p.n_max)
    q = derived(p)
    left = ops.sx1 + (2.0 * q.beta1) * ((ops.sp1 - ops.sm1) @ ops.y)
    right = ops.sx2 + (2.0 * q.beta2) * ((ops.sp2 - ops.sm2) @ ops.y)
    return _bare(p, ops) - q.zz_shift * (ops.sz1 @ ops.sz2) + p.J * (left @ right)


def multiphoton_coupling(p: ModelParams, n: int) -> float:
    """Magnitude of Gn for |0,e,e> <-> |n,g,g>, normalised so H_eff^(n) reproduces the exact element.

    The polaron-frame element is J exp(-alpha^2/2) alpha^n / sqrt(n!) with
    alpha = 2 (beta1 + beta2); dividing by the ladder factor sqrt(n!) gives Gn.
    For n = 1 this is Gs * exp(-alpha^2/2).
    """
    if n < 1:
        raise ValueError(f"photon number n must be >= 1, got {n}")
    q = derived(p)
    alpha = 2.0 * (q.beta1 + q.beta2)
    return abs(p.J) * math.exp(-0.5 * alpha**2) * abs(alpha) ** n / math.factorial(n)


def build_heff(p: ModelParams, n: int = 1, Gn: Optional[float] = None) -> Operator:
    if not 1 <= n <= p.n_max:
        raise ValueError(f"photon order n={n} outside [1, n_max={p.n_max}]")
    if Gn is None:
        Gn = derived(p).Gs if n == 1 else multiphoton_coupling(p, n)
    ops = _operators(p.n_max)
    an = np.linalg.matrix_power(ops.a.entries, n)
    an = Operator(p.space, an)
    pair_up = an @ ops.sp1 @ ops.sp2
    return Gn * (pair_up + pair_up.dag())
