"""Unit conversions for the driven 1D Coulomb problem.

Everything downstream works in Hartree atomic units (hbar = m_e = e = 1).
Laboratory inputs (GHz microwave frequencies, ns interaction times, V/cm field
amplitudes) are converted once at the boundary; inside the solver only the
classically scaled combinations matter:

    omega0 = omega * n0**3      (drive frequency / Kepler frequency of the n0 orbit)
    F0     = F * n0**4          (drive field / Coulomb field on the n0 orbit)
    t_cycles = t * omega / 2pi  (interaction time in field periods)

The drive is treated as flat-top for all t (no switch-on/off ramps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# CODATA values, full double precision.
ATOMIC_TIME_S = 2.418884326586e-17      # one atomic time unit in seconds
ATOMIC_FIELD_V_PER_CM = 5.142206748e9   # one atomic field unit in V/cm

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class LabParams:
    """Laboratory drive parameters: frequency in Hz, time in s, field in V/cm."""

    frequency: float
    interaction_time: float
    field_amplitude: float | None = None  # optional; None when working in scaled units

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError(f"frequency must be positive, got {self.frequency}")
        if not self.interaction_time > 0:
            raise ValueError(f"interaction_time must be positive, got {self.interaction_time}")
        if self.field_amplitude is not None and not self.field_amplitude > 0:
            raise ValueError(f"field_amplitude must be positive when present, got {self.field_amplitude}")


@dataclass(frozen=True)
class AtomicParams:
    """Drive + atom parameters in atomic units.

    n_eff is the effective ionization threshold: population above the energy
    -1/(2 n_eff^2) counts as ionized. math.inf selects the true continuum.
    """

    omega: float
    time: float
    field: float
    n0: int
    n_eff: float = math.inf

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.time < 0:
            raise ValueError(f"time must be nonnegative, got {self.time}")
        if self.field < 0:
            raise ValueError(f"field must be nonnegative, got {self.field}")
        if self.n0 < 1:
            raise ValueError(f"n0 must be >= 1, got {self.n0}")
        if not self.n_eff > 0:
            raise ValueError(f"n_eff must be positive, got {self.n_eff}")


@dataclass(frozen=True)
class ScaledParams:
    """Classically scaled drive parameters (dimensionless)."""

    omega0: float
    F0: float
    t_cycles: float


def lab_to_atomic(lab: LabParams, n0: int = 1, n_eff: float = math.inf) -> AtomicParams:
    """Convert laboratory parameters to atomic units.

    n0 and n_eff are not laboratory quantities; they are threaded through so the
    result is a complete AtomicParams.
    """
    omega = TWO_PI * lab.frequency * ATOMIC_TIME_S
    time = lab.interaction_time / ATOMIC_TIME_S
    field = 0.0
    if lab.field_amplitude is not None:
        field = lab.field_amplitude / ATOMIC_FIELD_V_PER_CM
    return AtomicParams(omega=omega, time=time, field=field, n0=n0, n_eff=n_eff)


def scale(atomic: AtomicParams) -> ScaledParams:
    """Scaled (classically invariant) parameters of an AtomicParams."""
    n0 = atomic.n0
    return ScaledParams(
        omega0=atomic.omega * n0**3,
        F0=atomic.field * n0**4,
        t_cycles=atomic.time * atomic.omega / TWO_PI,
    )


def unscale(scaled: ScaledParams, n0: int, n_eff: float = math.inf) -> AtomicParams:
    """Inverse of scale: atomic-unit parameters for a given n0."""
    if n0 < 1:
        raise ValueError(f"n0 must be >= 1, got {n0}")
    omega = scaled.omega0 / n0**3
    return AtomicParams(
        omega=omega,
        time=scaled.t_cycles * TWO_PI / omega,
        field=scaled.F0 / n0**4,
        n0=n0,
        n_eff=n_eff,
    )
