"""Counterdiabatic control term H_C for the two-band model.

Three constructions are provided and cross-checked in the tests:

* :func:`control_closed_form` -- the matrix written in spherical angles and
  their rates. Singular where ``hx = hy = 0``; kept as an oracle.
* :func:`control_cross_form` -- ``(h x dh/dt) . sigma / (2 |h|^2)``. Regular
  everywhere on the gapped torus; this is what the integrator uses.
* :func:`control_spectral` -- ``i sum_n (|d_t n><n| - <n|d_t n> |n><n|)``
  from finite differences of eigenvectors, in any gauge.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GapClosed, PoleEncountered
from .model import (
    DriveParams,
    FieldVector,
    Scheme,
    SphericalAngles,
    _coerce_scheme,
    eigensystem,
    field_array,
    field_phase_derivative,
    field_rate,
    field_vector,
    hamiltonian_matrix,
)

# Finite-difference step for the spectral oracle, in units of the period.
SPECTRAL_STEP = 1e-6


@dataclass(frozen=True)
class AngleRates:
    theta_dot: np.ndarray | float
    varphi_dot: np.ndarray | float


def angle_rates_from_field(h, h_dot) -> AngleRates:
    """Time derivatives of the polar and azimuthal angles of ``h``."""
    h = np.asarray(h.vector if isinstance(h, FieldVector) else h, dtype=float)
    h_dot = np.asarray(h_dot, dtype=float)
    h, h_dot = np.broadcast_arrays(h, h_dot)
    eps = np.linalg.norm(h, axis=-1)
    rho2 = h[..., 0] ** 2 + h[..., 1] ** 2
    if np.any(eps == 0):
        raise GapClosed("angle rates undefined at a degenerate point")
    if np.any(rho2 == 0):
        raise PoleEncountered("azimuth rate undefined where hx = hy = 0")
    eps_dot = np.einsum("...i,...i", h, h_dot) / eps
    rho = np.sqrt(rho2)
    theta_dot = (h[..., 2] * eps_dot - h_dot[..., 2] * eps) / (eps * rho)
    varphi_dot = (h[..., 0] * h_dot[..., 1] - h[..., 1] * h_dot[..., 0]) / rho2
    return AngleRates(theta_dot[()], varphi_dot[()])


def angle_rates(p: DriveParams, k, t) -> AngleRates:
    return angle_rates_from_field(field_vector(p, k, t), field_rate(p, k, t))


def control_closed_form(angles: SphericalAngles, rates: AngleRates) -> np.ndarray:
    theta = np.asarray(angles.theta, float)
    varphi = np.asarray(angles.varphi, float)
    if np.any(angles.pole_flag):
        raise PoleEncountered("closed form needs a defined azimuth")
    th_dot = np.asarray(rates.theta_dot, float)
    vp_dot = np.asarray(rates.varphi_dot, float)
    diag = (1 - np.cos(theta) ** 2) / 2 * vp_dot
    off = (-0.5j * th_dot - np.sin(2 * theta) * vp_dot / 4) * np.exp(-1j * varphi)
    diag, off = np.broadcast_arrays(diag, off)
    H = np.empty(diag.shape + (2, 2), dtype=complex)
    H[..., 0, 0] = diag
    H[..., 1, 1] = -diag
    H[..., 0, 1] = off
    H[..., 1, 0] = np.conj(off)
    return H


def control_field(h, h_dot) -> np.ndarray:
    """Field vector of the control term, ``h x h_dot / (2 |h|^2)``."""
    h = np.asarray(h.vector if isinstance(h, FieldVector) else h, dtype=float)
    h_dot = np.asarray(h_dot, dtype=float)
    norm2 = np.einsum("...i,...i", h, h)
    if np.any(norm2 == 0):
        raise GapClosed("control term undefined at a degenerate point")
    return np.cross(h, h_dot) / (2 * norm2[..., None])


def control_cross_form(h, h_dot) -> np.ndarray:
    return hamiltonian_matrix(control_field(h, h_dot))


def total_field(p: DriveParams, k, t, scheme=None) -> np.ndarray:
    """Field of ``H0`` (TP) or ``H0 + H_C`` (STATP) in physical-time units."""
    scheme = _coerce_scheme(scheme if scheme is not None else p.scheme)
    phase = p.phase(t)
    h = field_array(p, k, phase)
    if scheme is Scheme.TP:
        return h
    return h + p.omega * control_field(h, field_phase_derivative(p, k, phase))


def generator_field(p: DriveParams, k, phase, scheme, scaled: bool) -> np.ndarray:
    """Field of the propagator generator for the chosen time variable.

    With ``scaled=True`` the integration variable is the drive phase and the
    generator is ``H / omega``; the control part is then omega-independent,
    which keeps the problem well conditioned at very large omega.
    """
    h = field_array(p, k, phase)
    if scheme is Scheme.TP:
        return h / p.omega if scaled else h
    cd = control_field(h, field_phase_derivative(p, k, phase))
    if scaled:
        return h / p.omega + cd
    return h + p.omega * cd


def control_spectral(basis_minus, basis_center, basis_plus, dt) -> np.ndarray:
    """Control term from central differences of an eigenbasis.

    Each basis has shape ``(..., n_states, dim)``; row ``n`` is ``|n>``.
    """
    center = np.asarray(basis_center, dtype=complex)
    deriv = (np.asarray(basis_plus, complex) - np.asarray(basis_minus, complex)) / (2 * dt)
    # |d n><n|  summed over n
    term1 = np.einsum("...ni,...nj->...ij", deriv, center.conj())
    berry = np.einsum("...ni,...ni->...n", center.conj(), deriv)
    term2 = np.einsum("...n,...ni,...nj->...ij", berry, center, center.conj())
    return 1j * (term1 - term2)


def _eigenbasis(p: DriveParams, k, t, gauge):
    lam_p, lam_m, _, _ = eigensystem(field_vector(p, k, t))
    if gauge is not None:
        d1, d2 = gauge(t)
        lam_p = lam_p * np.exp(1j * np.asarray(d1))[..., None]
        lam_m = lam_m * np.exp(1j * np.asarray(d2))[..., None]
    return np.stack([lam_p, lam_m], axis=-2)


def control_spectral_at(p: DriveParams, k, t, step=None, gauge=None, richardson=True):
    """Spectral-formula control term at ``(k, t)`` from the exact eigenstates.

    ``gauge`` is an optional callable ``t -> (delta1, delta2)`` of extra
    phases multiplying the upper and lower eigenstates. With ``richardson``
    the estimates at ``step`` and ``2 step`` are combined to cancel the
    leading truncation error; the returned pair is ``(H_C, error_estimate)``.
    """
    h = step if step is not None else SPECTRAL_STEP * p.period

    def estimate(dt):
        return control_spectral(
            _eigenbasis(p, k, t - dt, gauge),
            _eigenbasis(p, k, t, gauge),
            _eigenbasis(p, k, t + dt, gauge),
            dt,
        )

    fine = estimate(h)
    if not richardson:
        return fine, np.nan
    coarse = estimate(2 * h)
    err = np.max(np.abs(fine - coarse))
    return (4 * fine - coarse) / 3, float(err)
