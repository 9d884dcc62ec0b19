"""Tammann (stiffened-gas) equation-of-state algebra for two-phase mixtures.

Conserved states are plain float arrays whose last axis holds the components

    1D: (z1*rho1, z2*rho2, rho*u, E, z1)
    2D: (z1*rho1, z2*rho2, rho*u, rho*v, E, z1)

so every routine here is vectorized over arbitrary leading axes.  All
functions are pure; nothing is cached between calls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    NonHyperbolicStateError,
    NonPhysicalDensityError,
    SingularCompressibilityError,
)

# Volume fractions closer than ZETA to 0 or 1 are treated as single phase
# when a per-phase density has to be recovered (avoids 0/0 in m_k/z_k at the
# 1e-6 / 1e-10 interface seeding used by the benchmarks).
ZETA = 1e-12

# Floor for p + p_wk inside kappa evaluations: root brackets may transiently
# visit states where one phase's p + p_wk is non-positive.
ZETA_P = 1e-13


@dataclass(frozen=True)
class PhasePair:
    """Tammann parameters (gamma_k, p_wk) for the two phases."""

    gamma1: float
    pw1: float
    gamma2: float
    pw2: float

    def __post_init__(self):
        if not (self.gamma1 > 1.0 and self.gamma2 > 1.0):
            raise ValueError("specific heat ratios must exceed 1")
        if self.pw1 < 0.0 or self.pw2 < 0.0:
            raise ValueError("reference pressures must be non-negative")


@dataclass(frozen=True)
class ConservedState:
    """Named point value of the conserved vector; mom has 1 or 2 entries."""

    m1: float
    m2: float
    mom: tuple
    energy: float
    z1: float

    def as_array(self):
        return np.array([self.m1, self.m2, *self.mom, self.energy, self.z1])

    @classmethod
    def from_array(cls, u):
        u = np.asarray(u, dtype=float)
        return cls(u[0], u[1], tuple(u[2:-2]), u[-2], u[-1])


@dataclass(frozen=True)
class PrimitiveState:
    """Named point value of (rho1, rho2, vel, p, z1)."""

    rho1: float
    rho2: float
    vel: tuple
    p: float
    z1: float

    def as_array(self):
        return np.array([self.rho1, self.rho2, *self.vel, self.p, self.z1])


def _as_float_array(u):
    """Array view keeping any floating dtype (extended precision included)."""
    u = np.asarray(u)
    if not np.issubdtype(u.dtype, np.floating):
        u = u.astype(float)
    return u


def split_state(u):
    """Views (m1, m2, mom, energy, z1) of the component axis."""
    u = _as_float_array(u)
    return u[..., 0], u[..., 1], u[..., 2:-2], u[..., -2], u[..., -1]


def mixture_density(u):
    u = _as_float_array(u)
    return u[..., 0] + u[..., 1]


def mixture_coefficients(z1, phases):
    """Mixture Gamma = 1/(gamma-1) and Pi = gamma*p_w/(gamma-1).

    Both are linear in z1, which is what makes the pressure-positive
    admissible set convex.
    """
    z1 = _as_float_array(z1)
    z2 = 1.0 - z1
    g1, g2 = phases.gamma1, phases.gamma2
    gamma_coef = z1 / (g1 - 1.0) + z2 / (g2 - 1.0)
    pi_coef = z1 * g1 * phases.pw1 / (g1 - 1.0) + z2 * g2 * phases.pw2 / (g2 - 1.0)
    return gamma_coef, pi_coef


def pressure(u, phases):
    """Mixture pressure p = (E - |rho u|^2/(2 rho) - Pi) / Gamma.

    The sign of the result is unrestricted; admissibility is a separate
    check (liquid-liquid mixtures legitimately carry negative pressure).
    """
    m1, m2, mom, energy, z1 = split_state(u)
    rho = m1 + m2
    if np.any(rho <= 0.0):
        raise NonPhysicalDensityError("mixture density must be positive")
    gamma_coef, pi_coef = mixture_coefficients(z1, phases)
    kinetic = 0.5 * np.sum(mom * mom, axis=-1) / rho
    return (energy - kinetic - pi_coef) / gamma_coef


def internal_energy_density(u):
    """rho*e = E - |rho u|^2 / (2 rho)."""
    m1, m2, mom, energy, _ = split_state(u)
    rho = m1 + m2
    if np.any(rho <= 0.0):
        raise NonPhysicalDensityError("mixture density must be positive")
    return energy - 0.5 * np.sum(mom * mom, axis=-1) / rho


def phase_sound_speed_sq(p, rho_k, gamma_k, pw_k):
    """c_k^2 = gamma_k (p + p_wk) / rho_k; may be negative."""
    rho_k = np.asarray(rho_k, dtype=float)
    if np.any(rho_k <= 0.0):
        raise NonPhysicalDensityError("phase density must be positive")
    return gamma_k * (np.asarray(p, dtype=float) + pw_k) / rho_k


def transport_sound_speed_sq(u, phases):
    """Squared transport-model sound speed gamma*(p+p_w)/rho; sign free."""
    rho = mixture_density(u)
    if np.any(rho <= 0.0):
        raise NonPhysicalDensityError("mixture density must be positive")
    z1 = np.asarray(u, dtype=float)[..., -1]
    gamma_coef, pi_coef = mixture_coefficients(z1, phases)
    p = pressure(u, phases)
    return ((gamma_coef + 1.0) * p + pi_coef) / (gamma_coef * rho)


def transport_sound_speed(u, phases):
    """Sound speed of the five-equation transport model."""
    c2 = transport_sound_speed_sq(u, phases)
    if np.any(c2 < 0.0):
        raise NonHyperbolicStateError("negative transport sound-speed radicand")
    return np.sqrt(c2)


def _phase_compressibilities(p, phases, floor):
    """nu_k = 1/(gamma_k (p + p_wk)); optionally floored for kappa use."""
    p = np.asarray(p, dtype=float)
    d1 = phases.gamma1 * (p + phases.pw1)
    d2 = phases.gamma2 * (p + phases.pw2)
    if floor:
        d1 = np.where(p + phases.pw1 <= ZETA_P, ZETA_P, d1)
        d2 = np.where(p + phases.pw2 <= ZETA_P, ZETA_P, d2)
    with np.errstate(divide="ignore"):
        return 1.0 / d1, 1.0 / d2


def wood_sound_speed_sq(u, phases):
    """Kapila-model mixture sound speed via Wood's harmonic rule.

    Because rho_k c_k^2 = gamma_k (p + p_wk), the sum never needs the
    per-phase densities themselves and stays finite through pure phases.
    No positivity floor is applied: a negative result is meaningful (it is
    exactly what makes the hyperbolicity set non-convex).
    """
    rho = mixture_density(u)
    if np.any(rho <= 0.0):
        raise NonPhysicalDensityError("mixture density must be positive")
    z1 = np.clip(np.asarray(u, dtype=float)[..., -1], 0.0, 1.0)
    p = pressure(u, phases)
    nu1, nu2 = _phase_compressibilities(p, phases, floor=False)
    nu = np.where(z1 == 0.0, 0.0, z1 * nu1) + np.where(z1 == 1.0, 0.0, (1.0 - z1) * nu2)
    if np.any(nu == 0.0) or np.any(~np.isfinite(nu)):
        raise SingularCompressibilityError("Wood compressibility sum is singular")
    return 1.0 / (rho * nu)


def kappa(u, phases):
    """Compressibility-contrast coefficient of the volume-fraction source."""
    z1 = np.asarray(u, dtype=float)[..., -1]
    return kappa_from_pressure(z1, pressure(u, phases), phases)


def kappa_from_pressure(z1, p, phases):
    """kappa = z1 z2 (nu1 - nu2)/nu evaluated at a given pressure.

    The phase compressibilities are floored (ZETA_P) so the evaluation stays
    finite inside implicit root brackets; kappa vanishes identically at
    z1 = 0 and z1 = 1.
    """
    z1 = np.asarray(z1, dtype=float)
    z2 = 1.0 - z1
    nu1, nu2 = _phase_compressibilities(p, phases, floor=True)
    nu = z1 * nu1 + z2 * nu2
    if np.any(nu == 0.0):
        raise SingularCompressibilityError("mixture compressibility vanished")
    return z1 * z2 * (nu1 - nu2) / nu


def phase_densities(u):
    """Recover (rho1, rho2) = (m1/z1, m2/z2) with a single-phase guard.

    When a phase's volume fraction is below ZETA its density is taken as the
    partial density itself, which is exact in the genuinely pure limit.
    """
    m1, m2, _, _, z1 = split_state(u)
    z1c = np.clip(z1, 0.0, 1.0)
    z2c = 1.0 - z1c
    rho1 = np.where(z1c >= ZETA, m1 / np.maximum(z1c, ZETA), m1)
    rho2 = np.where(z2c >= ZETA, m2 / np.maximum(z2c, ZETA), m2)
    return rho1, rho2


def is_admissible_gp(u, phases):
    """Vectorized membership mask for the pressure-positive admissible set.

    Pure-phase boundary states (one partial density exactly zero) count as
    admissible provided the mixture density stays positive, matching how the
    worked single-phase states are classified.
    """
    m1, m2, mom, energy, z1 = split_state(u)
    rho = m1 + m2
    ok = (m1 >= 0.0) & (m2 >= 0.0) & (z1 >= 0.0) & (z1 <= 1.0) & (rho > 0.0)
    gamma_coef, pi_coef = mixture_coefficients(z1, phases)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = (energy - 0.5 * np.sum(mom * mom, axis=-1) / rho - pi_coef) / gamma_coef
    return ok & (p > 0.0)


@dataclass(frozen=True)
class AdmissibilityReport:
    """Outcome of an admissibility check on a single state."""

    in_gp: bool
    in_g: bool
    pressure: float
    wood_c2: float
    failures: tuple

    def __bool__(self):
        return self.in_gp


def check_admissible_gp(u, phases):
    """Full report for one state: membership in G^p and in the wider set G.

    Never raises; inadmissible or degenerate states are reported with the
    condition that failed and its value.
    """
    u = np.asarray(u, dtype=float)
    m1, m2, mom, energy, z1 = split_state(u)
    rho = m1 + m2
    failures = []
    if m1 < 0.0:
        failures.append(f"z1*rho1={m1:.6g}<0")
    if m2 < 0.0:
        failures.append(f"z2*rho2={m2:.6g}<0")
    if not (0.0 <= z1 <= 1.0):
        failures.append(f"z1={z1:.6g} outside [0,1]")
    p = np.nan
    wood_c2 = np.nan
    if rho > 0.0:
        p = float(pressure(u, phases))
        if not p > 0.0:
            failures.append(f"p={p:.6g}<=0")
        try:
            wood_c2 = float(wood_sound_speed_sq(u, phases))
        except SingularCompressibilityError:
            wood_c2 = np.nan
    else:
        failures.append(f"rho={rho:.6g}<=0")
    in_gp = not failures
    in_g = (
        m1 >= 0.0
        and m2 >= 0.0
        and rho > 0.0
        and 0.0 <= z1 <= 1.0
        and np.isfinite(wood_c2)
        and wood_c2 > 0.0
    )
    return AdmissibilityReport(in_gp, bool(in_g), p, wood_c2, tuple(failures))


def conserved_from_primitive(prim, phases):
    """Map (rho1, rho2, vel, p, z1) rows to conserved rows.

    The mixture internal energy is assembled phase by phase:
    rho*e = sum_k z_k (p + gamma_k p_wk)/(gamma_k - 1).
    """
    prim = np.asarray(prim, dtype=float)
    rho1, rho2 = prim[..., 0], prim[..., 1]
    vel = prim[..., 2:-2]
    p, z1 = prim[..., -2], prim[..., -1]
    if np.any(rho1 <= 0.0) or np.any(rho2 <= 0.0):
        raise NonPhysicalDensityError("phase densities must be positive")
    if np.any((z1 < 0.0) | (z1 > 1.0)):
        raise ValueError("volume fraction outside [0,1]")
    z2 = 1.0 - z1
    m1 = z1 * rho1
    m2 = z2 * rho2
    rho = m1 + m2
    g1, g2 = phases.gamma1, phases.gamma2
    rho_e = z1 * (p + g1 * phases.pw1) / (g1 - 1.0) + z2 * (p + g2 * phases.pw2) / (g2 - 1.0)
    energy = rho_e + 0.5 * rho * np.sum(vel * vel, axis=-1)
    return np.concatenate(
        [
            m1[..., None],
            m2[..., None],
            rho[..., None] * vel,
            energy[..., None],
            z1[..., None],
        ],
        axis=-1,
    )


def primitive_from_conserved(u, phases):
    """Inverse of conserved_from_primitive (single-phase guard on rho_k)."""
    u = np.asarray(u, dtype=float)
    m1, m2, mom, _, z1 = split_state(u)
    rho = m1 + m2
    if np.any(rho <= 0.0):
        raise NonPhysicalDensityError("mixture density must be positive")
    rho1, rho2 = phase_densities(u)
    vel = mom / rho[..., None]
    p = pressure(u, phases)
    return np.concatenate(
        [rho1[..., None], rho2[..., None], vel, p[..., None], z1[..., None]],
        axis=-1,
    )
