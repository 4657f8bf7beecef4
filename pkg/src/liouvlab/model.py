"""Physical systems: qubit/qutrit Hamiltonians, jump operators, parameter paths.

Basis ordering is fixed as (|g>, |e>) for dim 2 and (|g>, |e>, |f>) for dim 3,
with index 0 the ground state. The sign convention sigma_z = |g><g| - |e><e|
puts the excited state at z = -1, so relaxation drives z toward +1.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import OutOfRange

DEFAULT_J_MAX = 16.0
DEFAULT_DELTA_MAX = 10.0 * math.pi


def _check_finite_nonneg(name: str, value: float) -> float:
    v = float(value)
    if not math.isfinite(v):
        raise OutOfRange(f"{name} must be finite, got {value!r}")
    if v < 0.0:
        raise OutOfRange(f"{name} must be >= 0, got {v}")
    return v


@dataclass(frozen=True)
class Rates:
    """Dissipation rates in 1/us.

    gamma_e: spontaneous emission |e> -> |g>.
    gamma_phi: pure dephasing.
    gamma_f: decay of |f> (qutrit only).
    gamma_f_extra: extra |f> decoherence (qutrit only).
    """

    gamma_e: float
    gamma_phi: float = 0.0
    gamma_f: float = 0.0
    gamma_f_extra: float = 0.0

    def __post_init__(self):
        for name in ("gamma_e", "gamma_phi", "gamma_f", "gamma_f_extra"):
            object.__setattr__(self, name, _check_finite_nonneg(name, getattr(self, name)))


@dataclass(frozen=True)
class DriveParams:
    """Drive coupling J and detuning Delta, both rad/us.

    J >= 0 by convention; a negative J is gauge-equivalent to a positive one
    and is rejected to keep parameterizations unique.
    """

    J: float
    Delta: float = 0.0

    def __post_init__(self):
        j = float(self.J)
        d = float(self.Delta)
        if not math.isfinite(j) or not math.isfinite(d):
            raise OutOfRange(f"drive parameters must be finite, got J={self.J!r}, Delta={self.Delta!r}")
        if j < 0.0:
            raise OutOfRange(f"J must be >= 0 (negative J is gauge-equivalent), got {j}")
        object.__setattr__(self, "J", j)
        object.__setattr__(self, "Delta", d)


def basis_ket(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def plus_x(dim: int = 2) -> np.ndarray:
    """(|g> + |e>)/sqrt(2), embedded in the g-e block for dim 3."""
    v = np.zeros(dim, dtype=complex)
    v[0] = v[1] = 1.0 / math.sqrt(2.0)
    return v


def minus_x(dim: int = 2) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[0] = 1.0 / math.sqrt(2.0)
    v[1] = -1.0 / math.sqrt(2.0)
    return v


def sigma_z(dim: int = 2) -> np.ndarray:
    """|g><g| - |e><e|; for dim 3 the |f> level is untouched (diag(1,-1,0))."""
    d = np.zeros(dim, dtype=complex)
    d[0], d[1] = 1.0, -1.0
    return np.diag(d)


def hamiltonian(drive: DriveParams, dim: int = 2) -> np.ndarray:
    """H_c = J(|g><e| + |e><g|) + Delta/2 (|g><g| - |e><e|).

    For dim 3 the same operator acts on the g-e block and the |f> row and
    column are zero (the drive does not couple to |f>).
    """
    if dim not in (2, 3):
        raise OutOfRange(f"dim must be 2 or 3, got {dim}")
    h = np.zeros((dim, dim), dtype=complex)
    h[0, 1] = h[1, 0] = drive.J
    h[0, 0] = 0.5 * drive.Delta
    h[1, 1] = -0.5 * drive.Delta
    return h


def jump_operators(rates: Rates, dim: int = 2, f_decay_to: str = "e") -> list[tuple[np.ndarray, str]]:
    """Collapse operators with labels; channels with zero rate are omitted.

    Qubit: L_e = sqrt(gamma_e)|g><e|, L_phi = sqrt(gamma_phi/2) sigma_z.
    Qutrit adds L_f = sqrt(gamma_f)|target><f| (target "e" by default,
    configurable to "g") and L_f_extra = sqrt(gamma_f_extra)|f><f|, a pure
    dephasing channel on |f> modeling extra decoherence of that level.
    """
    if dim not in (2, 3):
        raise OutOfRange(f"dim must be 2 or 3, got {dim}")
    if f_decay_to not in ("e", "g"):
        raise OutOfRange(f"f_decay_to must be 'e' or 'g', got {f_decay_to!r}")
    ops: list[tuple[np.ndarray, str]] = []
    if rates.gamma_e > 0.0:
        L = np.zeros((dim, dim), dtype=complex)
        L[0, 1] = math.sqrt(rates.gamma_e)
        ops.append((L, "e"))
    if rates.gamma_phi > 0.0:
        ops.append((math.sqrt(rates.gamma_phi / 2.0) * sigma_z(dim), "phi"))
    if dim == 3:
        if rates.gamma_f > 0.0:
            L = np.zeros((dim, dim), dtype=complex)
            target = 1 if f_decay_to == "e" else 0
            L[target, 2] = math.sqrt(rates.gamma_f)
            ops.append((L, "f"))
        if rates.gamma_f_extra > 0.0:
            L = np.zeros((dim, dim), dtype=complex)
            L[2, 2] = math.sqrt(rates.gamma_f_extra)
            ops.append((L, "f_extra"))
    return ops


@dataclass(frozen=True)
class QuantumSystem:
    """A dim-level system with its drive, rates, and collapse operators."""

    dim: int
    rates: Rates
    drive: DriveParams
    jump_ops: list[tuple[np.ndarray, str]] = field(default_factory=list)

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise OutOfRange(f"dim must be 2 or 3, got {self.dim}")
        for L, label in self.jump_ops:
            if L.shape != (self.dim, self.dim):
                raise OutOfRange(
                    f"jump operator {label!r} has shape {L.shape}, expected {(self.dim, self.dim)}"
                )

    def with_drive(self, drive: DriveParams) -> "QuantumSystem":
        return replace(self, drive=drive)

    def hamiltonian(self) -> np.ndarray:
        return hamiltonian(self.drive, self.dim)


def make_system(
    drive: DriveParams,
    rates: Rates,
    dim: int = 2,
    f_decay_to: str = "e",
) -> QuantumSystem:
    return QuantumSystem(
        dim=dim,
        rates=rates,
        drive=drive,
        jump_ops=jump_operators(rates, dim, f_decay_to),
    )


@dataclass(frozen=True)
class ParameterSchedule:
    """Closed parameter loop J(t), Delta(t), gamma_e(t) over t in [0, T].

    The default path is J(t) = J_max cos^2(pi t/T) and
    Delta(t) = s * Delta_max sin(2 pi t/T), with s = +1 for ccw and -1 for cw.
    Custom profile callables, when given, describe the ccw branch; the cw
    direction negates the detuning profile pointwise.

    gamma_e_schedule selects between a constant emission rate and the ramp
    gamma_e(t) = gamma_e0 [1 - cos(2 pi t/T)]/2, which suppresses dissipation
    near the loop endpoints.
    """

    T: float
    direction: str = "ccw"
    J_max: float = DEFAULT_J_MAX
    Delta_max: float = DEFAULT_DELTA_MAX
    gamma_e_schedule: str = "constant"
    J_of_t: Optional[Callable[[float], float]] = None
    Delta_of_t: Optional[Callable[[float], float]] = None
    gamma_e_of_t: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0.0):
            raise OutOfRange(f"T must be positive and finite, got {self.T!r}")
        if self.direction not in ("cw", "ccw"):
            raise OutOfRange(f"direction must be 'cw' or 'ccw', got {self.direction!r}")
        if self.gamma_e_schedule not in ("constant", "cosine"):
            raise OutOfRange(
                f"gamma_e_schedule must be 'constant' or 'cosine', got {self.gamma_e_schedule!r}"
            )

    def flipped(self) -> "ParameterSchedule":
        return replace(self, direction="cw" if self.direction == "ccw" else "ccw")


def schedule_eval(s: ParameterSchedule, t: float, rates: Rates) -> tuple[DriveParams, Rates]:
    """Evaluate the path at time t, applying the direction sign to Delta."""
    if not (0.0 <= t <= s.T):
        raise OutOfRange(f"t={t} outside schedule domain [0, {s.T}]")
    sign = 1.0 if s.direction == "ccw" else -1.0
    if s.J_of_t is not None:
        J = float(s.J_of_t(t))
    else:
        J = s.J_max * math.cos(math.pi * t / s.T) ** 2
    if s.Delta_of_t is not None:
        Delta = sign * float(s.Delta_of_t(t))
    else:
        Delta = sign * s.Delta_max * math.sin(2.0 * math.pi * t / s.T)
    if s.gamma_e_of_t is not None:
        ge = float(s.gamma_e_of_t(t))
    elif s.gamma_e_schedule == "cosine":
        ge = rates.gamma_e * (1.0 - math.cos(2.0 * math.pi * t / s.T)) / 2.0
    else:
        ge = rates.gamma_e
    return DriveParams(J=J, Delta=Delta), replace(rates, gamma_e=ge)
