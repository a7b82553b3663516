"""Raman (Lambda-system) realization of the two-band drive.

Model quantities are dimensionless; the lab maps them to angular
frequencies through ``energy_rad_s = energy * unit * Delta`` and
``t_seconds = t / (unit * Delta)``. The default ``unit = 1e-7`` puts the
default model field at about ``2.8e-7 Delta``.

The three-level Hamiltonian in the rotating frame, basis ``(|3>, |2>, |1>)``::

    H = 1/2 [[2 Delta, Omega_s,            Omega_p e^{-i phi_L}],
             [Omega_s, 0,                  0                   ],
             [Omega_p e^{i phi_L}, 0,      0                   ]]

Eliminating ``|3>`` to second order leaves, in the basis ``(|2>, |1>)``, a
common light shift plus the traceless part returned by
:func:`effective_two_level`.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .counterdiabatic import total_field
from .errors import ConfigError, GapClosed, ValidityViolated
from .evolution import su2_propagator
from .model import DriveParams, FieldVector, _coerce_scheme, hamiltonian_matrix

WARN_RATIO = 1e-2
MAX_RATIO = 1e-1
PULSE_CSV_COLUMNS = ("t_seconds", "Omega_s_over_Delta", "Omega_p_over_Delta", "phi_L_rad")


@dataclass(frozen=True)
class LambdaParams:
    Delta: float = 2 * np.pi * 2.5e9
    unit: float = 1e-7

    def __post_init__(self):
        if not np.isfinite(self.Delta) or self.Delta <= 0:
            raise ConfigError("Delta must be positive")
        if not np.isfinite(self.unit) or self.unit <= 0:
            raise ConfigError("unit must be positive")

    @property
    def energy_scale(self) -> float:
        """rad/s per model energy unit."""
        return self.unit * self.Delta


@dataclass(frozen=True)
class PulsePoint:
    """Rabi frequencies (rad/s, non-negative) and laser phase difference."""

    Omega_s: np.ndarray | float
    Omega_p: np.ndarray | float
    phi_L: np.ndarray | float
    t: np.ndarray | float = 0.0


def validity_ratio(pp: PulsePoint, lp: LambdaParams) -> float:
    return float(np.max(np.maximum(pp.Omega_s, pp.Omega_p)) / lp.Delta)


def check_validity(pp: PulsePoint, lp: LambdaParams) -> float:
    ratio = validity_ratio(pp, lp)
    if ratio > MAX_RATIO:
        raise ValidityViolated(f"max Rabi frequency / Delta = {ratio:.3g} exceeds {MAX_RATIO}")
    if ratio > WARN_RATIO:
        warnings.warn(f"max Rabi frequency / Delta = {ratio:.3g}; elimination is only approximate",
                      RuntimeWarning, stacklevel=3)
    return ratio


def effective_coefficients(pp: PulsePoint, lp: LambdaParams):
    """``(Delta_eff, Omega_eff)`` after eliminating the excited level."""
    Os = np.asarray(pp.Omega_s, float)
    Op = np.asarray(pp.Omega_p, float)
    return (Op**2 - Os**2) / (4 * lp.Delta), -Op * Os / (2 * lp.Delta)


def effective_field(pp: PulsePoint, lp: LambdaParams, check: bool = True) -> np.ndarray:
    """Field vector (rad/s) of the effective two-level Hamiltonian."""
    if check:
        check_validity(pp, lp)
    d_eff, o_eff = effective_coefficients(pp, lp)
    phi = np.asarray(pp.phi_L, float)
    return np.stack(np.broadcast_arrays(o_eff * np.cos(phi) / 2, o_eff * np.sin(phi) / 2, d_eff / 2), axis=-1)


def effective_two_level(pp: PulsePoint, lp: LambdaParams) -> np.ndarray:
    return hamiltonian_matrix(effective_field(pp, lp))


def pulse_shapes(h, lp: LambdaParams, t=0.0, check: bool = True) -> PulsePoint:
    """Rabi frequencies and phase realizing the target field ``h`` (rad/s).

    ``Omega_p^2 - Omega_s^2`` sets the detuning and ``Omega_p Omega_s`` the
    in-plane magnitude; the negative sign of the Raman coupling is absorbed
    into ``phi_L`` by a shift of pi.
    """
    v = np.asarray(h.vector if isinstance(h, FieldVector) else h, dtype=float)
    hx, hy, hz = v[..., 0], v[..., 1], v[..., 2]
    rho2 = hx**2 + hy**2
    eps = np.sqrt(rho2 + hz**2)
    if np.any(eps == 0):
        raise GapClosed("cannot engineer pulses for a zero field")
    # eps -+ hz without cancellation
    with np.errstate(divide="ignore", invalid="ignore"):
        eps_minus_hz = np.where(hz > 0, rho2 / (eps + np.abs(hz)), eps - hz)
        eps_plus_hz = np.where(hz < 0, rho2 / (eps + np.abs(hz)), eps + hz)
    Os = np.sqrt(4 * lp.Delta * eps_minus_hz)
    Op = np.sqrt(4 * lp.Delta * eps_plus_hz)
    phi = np.mod(np.arctan2(hy, hx) + np.pi, 2 * np.pi)
    pp = PulsePoint(Os[()], Op[()], phi[()], np.asarray(t, float)[()])
    if check:
        check_validity(pp, lp)
    return pp


@dataclass(frozen=True)
class PulseSequence:
    t_seconds: np.ndarray
    Omega_s: np.ndarray
    Omega_p: np.ndarray
    phi_L: np.ndarray
    scheme: str
    k: float

    @property
    def points(self) -> PulsePoint:
        return PulsePoint(self.Omega_s, self.Omega_p, self.phi_L, self.t_seconds)

    @property
    def duration(self) -> float:
        return float(self.t_seconds[-1] - self.t_seconds[0])


def pulse_sequence(p: DriveParams, k: float, lp: LambdaParams, scheme=None, n_samples: int | None = None) -> PulseSequence:
    """Pulses over one drive period at fixed momentum ``k``.

    For the controlled scheme the traceless part of ``H0 + H_C`` is
    realized; its identity part is a global phase at fixed ``k``.
    """
    scheme = _coerce_scheme(scheme if scheme is not None else p.scheme)
    n = n_samples or p.n_t + 1
    t = np.linspace(0.0, p.period, n)
    h = total_field(p, float(k), t, scheme) * lp.energy_scale
    pp = pulse_shapes(h, lp, t / lp.energy_scale)
    return PulseSequence(np.asarray(pp.t), pp.Omega_s, pp.Omega_p, pp.phi_L, scheme.value, float(k))


def three_level_hamiltonian(pp: PulsePoint, lp: LambdaParams) -> np.ndarray:
    """Rotating-frame Hamiltonian in units of Delta, basis ``(|3>, |2>, |1>)``."""
    Os = np.asarray(pp.Omega_s, float) / lp.Delta
    Op = np.asarray(pp.Omega_p, float) / lp.Delta
    ph = np.exp(-1j * np.asarray(pp.phi_L, float))
    Os, Op, ph = np.broadcast_arrays(Os, Op, ph)
    H = np.zeros(Os.shape + (3, 3), dtype=complex)
    H[..., 0, 0] = 1.0
    H[..., 0, 1] = H[..., 1, 0] = Os / 2
    H[..., 0, 2] = Op * ph / 2
    H[..., 2, 0] = np.conj(Op * ph) / 2
    return H


@dataclass(frozen=True)
class EliminationReport:
    t_seconds: np.ndarray
    fidelity: np.ndarray
    p3: np.ndarray
    ratio: float

    @property
    def final_fidelity(self) -> float:
        return float(self.fidelity[-1])

    @property
    def max_p3(self) -> float:
        return float(self.p3.max())

    def as_dict(self) -> dict:
        return {
            "final_fidelity": self.final_fidelity,
            "min_fidelity": float(self.fidelity.min()),
            "max_p3": self.max_p3,
            "validity_ratio": self.ratio,
            "samples": int(len(self.t_seconds)),
        }


def validate_elimination(seq: PulseSequence, lp: LambdaParams, initial=None, strict: bool = True) -> EliminationReport:
    """Integrate the three-level and effective two-level models side by side.

    Each interval between samples uses the exponential of the averaged
    endpoint Hamiltonians. ``initial`` is a two-level state in the basis
    ``(|2>, |1>)``; by default the lower eigenstate of the first effective
    Hamiltonian. Fidelity is the squared overlap of the effective state with
    the ground-manifold part of the three-level state, which is insensitive
    to the common light shift. ``strict=False`` allows ratios above the hard
    bound for negative-control runs.
    """
    pp = seq.points
    ratio = validity_ratio(pp, lp) if not strict else check_validity(pp, lp)
    field = effective_field(pp, lp, check=False) / lp.Delta
    if initial is None:
        w, V = np.linalg.eigh(hamiltonian_matrix(field[0]))
        psi2 = V[:, 0]
    else:
        psi2 = np.asarray(initial, dtype=complex)
        if abs(np.vdot(psi2, psi2).real - 1) > 1e-10:
            raise ConfigError("initial state must be normalized")
    psi3 = np.concatenate([[0.0], psi2]).astype(complex)

    tau = seq.t_seconds * lp.Delta
    dtau = np.diff(tau)
    H3 = three_level_hamiltonian(pp, lp)
    H3_mid = 0.5 * (H3[1:] + H3[:-1])
    w, V = np.linalg.eigh(H3_mid)
    U3 = np.einsum("nij,nj,nkj->nik", V, np.exp(-1j * w * dtau[:, None]), V.conj())
    U2 = su2_propagator(0.5 * (field[1:] + field[:-1]), dtau)

    n = len(tau)
    fid = np.empty(n)
    p3 = np.empty(n)
    fid[0], p3[0] = 1.0, 0.0
    for i in range(n - 1):
        psi3 = U3[i] @ psi3
        psi2 = U2[i] @ psi2
        fid[i + 1] = abs(np.vdot(psi2, psi3[1:])) ** 2
        p3[i + 1] = abs(psi3[0]) ** 2
    return EliminationReport(seq.t_seconds, fid, p3, ratio)


def write_pulse_csv(seq: PulseSequence, lp: LambdaParams, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PULSE_CSV_COLUMNS)
        for row in zip(seq.t_seconds, seq.Omega_s / lp.Delta, seq.Omega_p / lp.Delta, seq.phi_L):
            w.writerow(["%.17g" % x for x in row])
