"""Driven Rice-Mele model in momentum space and on the lattice.

Conventions
-----------
* hbar = a = 1; the unit cell holds two sites, ``UNIT_CELL = 2``.
* Sites are indexed ``l = 0 .. 2L-1`` with periodic wrap. Even sites form
  the "e" sublattice (spin up, on-site ``+Delta0 cos(phi)``), odd sites the
  "o" sublattice (spin down).
* A Bloch state ``|k, s>`` has amplitude ``exp(-i k l) / sqrt(L)`` on the
  sites of sublattice ``s``. With this choice the lattice Hamiltonian is
  block diagonal with blocks ``H0(k, t) = h(k, t) . sigma`` on the grid
  ``k_n = pi n / L``.
* The Brillouin zone ``[0, pi)`` is sampled with the endpoint excluded. In
  this gauge ``H0(k + pi) = sigma_z H0(k) sigma_z``, so quantities that are
  periodic in ``k`` close up to a rotation by pi about z.

Arrays are used throughout; every function broadcasts over leading axes.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GapClosed

UNIT_CELL = 2

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])

# k -> k + pi acts on Bloch vectors as a rotation by pi about z.
BZ_TWIST = np.array([-1.0, -1.0, 1.0])


class Scheme(str, enum.Enum):
    TP = "TP"
    STATP = "STATP"


@dataclass(frozen=True)
class DriveParams:
    """Model and drive constants plus the (k, t) sampling grid.

    ``gap_tol=None`` skips the gap validation, which is what
    :func:`minimum_gap` needs for deliberately gapless parameter sets.
    """

    J: float = -1.0
    delta0: float = 0.8
    Delta0: float = 2.0
    omega: float = 10.0
    phi0: float = 0.0
    scheme: Scheme = Scheme.STATP
    n_k: int = 128
    n_t: int = 4096
    gap_tol: float | None = 1e-6
    d: int = field(default=UNIT_CELL, init=False)

    def __post_init__(self):
        object.__setattr__(self, "scheme", _coerce_scheme(self.scheme))
        if not np.isfinite(self.omega) or self.omega <= 0:
            raise ConfigError(f"omega must be positive, got {self.omega}")
        if int(self.n_k) != self.n_k or self.n_k < 2:
            raise ConfigError(f"n_k must be an integer >= 2, got {self.n_k}")
        if int(self.n_t) != self.n_t or self.n_t < 2:
            raise ConfigError(f"n_t must be an integer >= 2, got {self.n_t}")
        if not 0.0 <= self.phi0 < 2 * np.pi:
            raise ConfigError(f"phi0 must lie in [0, 2pi), got {self.phi0}")
        if self.gap_tol is not None:
            if self.gap_tol <= 0:
                raise ConfigError("gap_tol must be positive (or None to skip)")
            gap = minimum_gap(self)
            if gap <= self.gap_tol:
                raise GapClosed(
                    f"minimum gap {gap:.3e} on the {self.n_k}x{self.n_t} grid "
                    f"does not exceed gap_tol={self.gap_tol:.1e}"
                )

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega

    @property
    def k_grid(self) -> np.ndarray:
        return (2 * np.pi / self.d) * np.arange(self.n_k) / self.n_k

    @property
    def t_grid(self) -> np.ndarray:
        """``n_t + 1`` sample times covering one closed period."""
        return self.period * np.arange(self.n_t + 1) / self.n_t

    def phase(self, t):
        return self.phi0 + self.omega * np.asarray(t, dtype=float)


def _coerce_scheme(value) -> Scheme:
    try:
        return Scheme(value.upper() if isinstance(value, str) else value)
    except ValueError:
        raise ConfigError(f"unknown scheme {value!r}; expected TP or STATP") from None


@dataclass(frozen=True)
class FieldVector:
    hx: np.ndarray | float
    hy: np.ndarray | float
    hz: np.ndarray | float
    eps_plus: np.ndarray | float

    @classmethod
    def from_array(cls, v) -> "FieldVector":
        v = np.asarray(v, dtype=float)
        return cls(v[..., 0], v[..., 1], v[..., 2], np.linalg.norm(v, axis=-1))

    @property
    def vector(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(self.hx, self.hy, self.hz), axis=-1)

    @property
    def eps_minus(self):
        return -self.eps_plus


@dataclass(frozen=True)
class SphericalAngles:
    theta: np.ndarray | float
    varphi: np.ndarray | float
    pole_flag: np.ndarray | bool


def field_array(p: DriveParams, k, phase) -> np.ndarray:
    """``(hx, hy, hz)`` stacked on the last axis, as a function of drive phase."""
    k, phase = np.broadcast_arrays(np.asarray(k, float), np.asarray(phase, float))
    return np.stack(
        [
            2 * p.J * np.cos(k),
            2 * p.delta0 * np.sin(k) * np.sin(phase),
            p.Delta0 * np.cos(phase),
        ],
        axis=-1,
    )


def field_phase_derivative(p: DriveParams, k, phase) -> np.ndarray:
    """``d h / d phi``; multiply by omega for the time derivative."""
    k, phase = np.broadcast_arrays(np.asarray(k, float), np.asarray(phase, float))
    return np.stack(
        [
            np.zeros_like(k),
            2 * p.delta0 * np.sin(k) * np.cos(phase),
            -p.Delta0 * np.sin(phase),
        ],
        axis=-1,
    )


def field_vector(p: DriveParams, k, t) -> FieldVector:
    return FieldVector.from_array(field_array(p, k, p.phase(t)))


def field_rate(p: DriveParams, k, t) -> np.ndarray:
    """Analytic time derivative of the field, shape ``(..., 3)``."""
    return p.omega * field_phase_derivative(p, k, p.phase(t))


def hamiltonian_matrix(h) -> np.ndarray:
    """``h . sigma`` for a field vector or an array of shape ``(..., 3)``."""
    v = h.vector if isinstance(h, FieldVector) else np.asarray(h, dtype=float)
    return np.einsum("...i,ijk->...jk", v.astype(complex), PAULI)


def _require_gap(eps, what="field"):
    if np.any(np.asarray(eps) == 0):
        raise GapClosed(f"degenerate {what}: eps_plus == 0")


def spherical_angles(h: FieldVector) -> SphericalAngles:
    _require_gap(h.eps_plus)
    hx, hy, hz = np.broadcast_arrays(*(np.asarray(c, float) for c in (h.hx, h.hy, h.hz)))
    rho = np.hypot(hx, hy)
    theta = np.arctan2(rho, hz)
    pole = rho == 0
    varphi = np.where(pole, 0.0, np.mod(np.arctan2(hy, hx), 2 * np.pi))
    if theta.ndim == 0:
        return SphericalAngles(float(theta), float(varphi), bool(pole))
    return SphericalAngles(theta, varphi, pole)


def eigensystem(h: FieldVector):
    """Upper and lower eigenstates in the closed-form gauge.

    Returns ``(lam_plus, lam_minus, eps_plus, eps_minus)`` with the spinors
    stacked on the last axis::

        lam_plus  = ( cos(theta/2),                 sin(theta/2) e^{i varphi} )
        lam_minus = (-sin(theta/2) e^{-i varphi},   cos(theta/2) )
    """
    ang = spherical_angles(h)
    c = np.cos(np.asarray(ang.theta) / 2)
    s = np.sin(np.asarray(ang.theta) / 2)
    e = np.exp(1j * np.asarray(ang.varphi))
    lam_plus = np.stack([c + 0j, s * e], axis=-1)
    lam_minus = np.stack([-s * np.conj(e), c + 0j], axis=-1)
    return lam_plus, lam_minus, h.eps_plus, -np.asarray(h.eps_plus)


def lower_state(p: DriveParams, k, t) -> np.ndarray:
    return eigensystem(field_vector(p, k, t))[1]


def minimum_gap(p: DriveParams) -> float:
    """Smallest band gap ``2 eps_plus`` on the ``n_k x n_t`` grid of ``p``."""
    k = p.k_grid[:, None]
    phase = p.phi0 + 2 * np.pi * np.arange(p.n_t)[None, :] / p.n_t
    eps = np.linalg.norm(field_array(p, k, phase), axis=-1)
    return float(2 * eps.min())


# --------------------------------------------------------------------------
# position space


@dataclass(frozen=True)
class LatticeHamiltonian:
    matrix: np.ndarray
    L: int
    t: float


def lattice_k_grid(L: int) -> np.ndarray:
    return np.pi * np.arange(L) / L


def fourier_unitary(L: int) -> np.ndarray:
    """Columns are the Bloch states ``|k_n, e>``, ``|k_n, o>`` (column 2n, 2n+1)."""
    sites = np.arange(2 * L)
    k = lattice_k_grid(L)
    phases = np.exp(-1j * np.outer(sites, k)) / np.sqrt(L)
    U = np.zeros((2 * L, 2 * L), dtype=complex)
    even = sites % 2 == 0
    U[even, 0::2] = phases[even]
    U[~even, 1::2] = phases[~even]
    return U


def block_diagonal(blocks: np.ndarray) -> np.ndarray:
    L = blocks.shape[0]
    out = np.zeros((2 * L, 2 * L), dtype=blocks.dtype)
    idx = np.arange(L)
    for a in range(2):
        for b in range(2):
            out[2 * idx + a, 2 * idx + b] = blocks[:, a, b]
    return out


def rice_mele_lattice(p: DriveParams, L: int, t: float) -> np.ndarray:
    """Nearest-neighbour lattice matrix with periodic wrap (bare scheme)."""
    n = 2 * L
    sites = np.arange(n)
    phase = float(p.phase(t))
    hop = p.J + p.delta0 * np.sin(np.pi * sites + phase)
    H = np.diag(p.Delta0 * np.cos(np.pi * sites + phase)).astype(complex)
    H[sites, (sites + 1) % n] += hop
    H[(sites + 1) % n, sites] += hop
    return H


def lattice_hamiltonian(p: DriveParams, L: int, t: float, scheme=None) -> LatticeHamiltonian:
    """Position-space Hamiltonian on ``2L`` sites at time ``t``.

    The bare scheme is the explicit nearest-neighbour chain; the controlled
    scheme is the Fourier sandwich ``U_F diag_k[H0 + H_C] U_F^dagger`` and is
    dense because the control term has long-range hoppings.
    """
    if int(L) != L or L < 4:
        raise ConfigError(f"L must be an integer >= 4, got {L}")
    scheme = _coerce_scheme(scheme if scheme is not None else p.scheme)
    k = lattice_k_grid(L)
    _require_gap(np.linalg.norm(field_array(p, k, p.phase(t)), axis=-1), "lattice k-grid")
    if scheme is Scheme.TP:
        H = rice_mele_lattice(p, L, t)
    else:
        from .counterdiabatic import total_field

        U = fourier_unitary(L)
        blocks = hamiltonian_matrix(total_field(p, k, t, scheme))
        H = U @ block_diagonal(blocks) @ U.conj().T
        H = 0.5 * (H + H.conj().T)
    return LatticeHamiltonian(H, int(L), float(t))
