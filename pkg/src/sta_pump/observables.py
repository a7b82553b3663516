"""Pauli expectations, Berry curvature, position shifts and Chern number.

Orientation: the position shift is ``y(k, t) = (1/d) int_0^t B(k, t') dt'``
with ``B = (d_k s x d_t s) . s / 2`` and ``s = -<sigma>`` normalized. With the
Bloch convention of :mod:`sta_pump.model` a positive ``y`` is a displacement
towards increasing site index, so the average shift over one period equals
the Chern number ``(1/2pi) int F0 dk dt`` (both +1 at the default
parameters) and matches the lattice centre-of-mass motion.

Finite differences in ``k`` wrap across the zone edge with the rotation
``BZ_TWIST`` (``k -> k + pi`` flips the in-plane components). In ``t`` the
stencil is periodic for closed trajectories and one-sided at the ends
otherwise.
"""
from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVector, GapClosed, OracleMismatch
from .evolution import EvolutionConfig, evolve_k
from .model import (
    BZ_TWIST,
    SIGMA_Z,
    DriveParams,
    FieldVector,
    Scheme,
    _coerce_scheme,
    eigensystem,
    field_array,
    minimum_gap,
)

QUANTIZED_TOL = 0.05
MIN_VECTOR_NORM = 1e-6
DEFAULT_GAP_TOL = 1e-6


@dataclass(frozen=True)
class TrajectoryGrid:
    """Raw Pauli expectations on an ``n_k x (n_t + 1)`` grid."""

    sigma: np.ndarray
    k: np.ndarray
    t: np.ndarray
    closed: bool = False
    d: int = 2

    @property
    def dk(self) -> float:
        return (2 * np.pi / self.d) / len(self.k)

    @property
    def dt(self) -> float:
        return (self.t[-1] - self.t[0]) / (len(self.t) - 1)


@dataclass(frozen=True)
class CurvatureGrid:
    """Curvature on ``n_k x (n_t + 1)`` points; the last column closes the period."""

    values: np.ndarray
    k: np.ndarray
    t: np.ndarray
    d: int = 2

    @property
    def dk(self) -> float:
        return (2 * np.pi / self.d) / len(self.k)

    @property
    def dt(self) -> float:
        return (self.t[-1] - self.t[0]) / (len(self.t) - 1)

    def integral(self) -> float:
        """Trapezoid integral over the whole (k, t) domain."""
        return float(np.trapezoid(self.values, dx=self.dt, axis=1).sum() * self.dk)


@dataclass(frozen=True)
class ChernResult:
    raw: float
    integer: int
    quantized: bool
    link: int | None

    @property
    def value(self) -> int | None:
        return self.integer if self.quantized else None


def pauli_expectations(s) -> np.ndarray:
    s = np.asarray(s, dtype=complex)
    a, b = s[..., 0], s[..., 1]
    ab = np.conj(a) * b
    return np.stack([2 * ab.real, 2 * ab.imag, np.abs(a) ** 2 - np.abs(b) ** 2], axis=-1)


def _k_derivative(u, dk):
    up = np.roll(u, -1, axis=0)
    um = np.roll(u, 1, axis=0)
    up[-1] = u[0] * BZ_TWIST
    um[0] = u[-1] * BZ_TWIST
    return (up - um) / (2 * dk)


def _t_derivative(u, dt, closed):
    if closed:
        core = u[:, :-1]
        d = (np.roll(core, -1, axis=1) - np.roll(core, 1, axis=1)) / (2 * dt)
        return np.concatenate([d, d[:, :1]], axis=1)
    return np.gradient(u, dt, axis=1, edge_order=2)


def _triple(dk_u, dt_u, u):
    return 0.5 * np.einsum("...i,...i", np.cross(dk_u, dt_u), u)


def static_curvature(p: DriveParams) -> CurvatureGrid:
    """Curvature ``F0`` of the analytic unit field on the grid of ``p``.

    Central differences use the field evaluated at the neighbouring grid
    points, which is the periodic wrap in both directions.
    """
    gap = minimum_gap(p)
    if gap <= (p.gap_tol or DEFAULT_GAP_TOL):
        raise GapClosed(f"minimum gap {gap:.3e} on the curvature grid")
    k = p.k_grid[:, None]
    t = p.t_grid[None, :]
    dk = (2 * np.pi / p.d) / p.n_k
    dt = p.period / p.n_t

    def unit(kk, tt):
        h = field_array(p, kk, p.phase(tt))
        return h / np.linalg.norm(h, axis=-1, keepdims=True)

    u = unit(k, t)
    dk_u = (unit(k + dk, t) - unit(k - dk, t)) / (2 * dk)
    dt_u = (unit(k, t + dt) - unit(k, t - dt)) / (2 * dt)
    return CurvatureGrid(_triple(dk_u, dt_u, u), p.k_grid, p.t_grid, p.d)


def dynamical_curvature(g: TrajectoryGrid, closed: bool | None = None) -> CurvatureGrid:
    """Curvature from the negated, normalized expectation triples."""
    closed = g.closed if closed is None else closed
    s = -np.asarray(g.sigma, dtype=float)
    norm = np.linalg.norm(s, axis=-1, keepdims=True)
    if np.any(norm < MIN_VECTOR_NORM):
        raise DegenerateVector("Bloch vector shorter than 1e-6; direction undefined")
    u = s / norm
    B = _triple(_k_derivative(u, g.dk), _t_derivative(u, g.dt, closed), u)
    return CurvatureGrid(B, g.k, g.t, g.d)


def running_position_shift(B: CurvatureGrid) -> np.ndarray:
    """``y(k, t_j)`` for every grid point (cumulative trapezoid in t)."""
    inc = 0.5 * (B.values[:, 1:] + B.values[:, :-1]) * B.dt
    y = np.zeros_like(B.values)
    y[:, 1:] = np.cumsum(inc, axis=1) / B.d
    return y


def position_shift(B: CurvatureGrid, k_index=None):
    """``y(k, T)`` at one momentum index, or for all momenta."""
    y = running_position_shift(B)[:, -1]
    return y if k_index is None else float(y[k_index])


def average_position_shift(B: CurvatureGrid, t_index=None):
    """``ybar(t) = (d/2pi) sum_k y(k, t) dk``; the full series if ``t_index`` is None."""
    ybar = running_position_shift(B).sum(axis=0) * B.dk * B.d / (2 * np.pi)
    return ybar if t_index is None else float(ybar[t_index])


def trajectory_grid(
    p: DriveParams,
    cfg: EvolutionConfig | None = None,
    scheme=None,
    perturbation=None,
    plan=None,
) -> TrajectoryGrid:
    """Evolve every momentum of ``p.k_grid`` from the lower band and record ``<sigma>``."""
    scheme = _coerce_scheme(scheme if scheme is not None else p.scheme)
    t, states = evolve_k(p, p.k_grid, cfg, scheme=scheme, perturbation=perturbation, plan=plan)
    closed = scheme is Scheme.STATP and perturbation is None
    return TrajectoryGrid(pauli_expectations(states), p.k_grid, t, closed, p.d)


def pump_shift(p: DriveParams, cfg: EvolutionConfig | None = None, scheme=None, perturbation=None, plan=None):
    """Run the momentum-space pump; returns ``(ybar(T), grid, curvature)``."""
    g = trajectory_grid(p, cfg, scheme, perturbation, plan)
    B = dynamical_curvature(g)
    return average_position_shift(B, -1), g, B


# --------------------------------------------------------------------------
# Chern number


def link_variable_chern(states: np.ndarray) -> tuple[int | None, float]:
    """Lattice Chern number from lower-band states on the (k, t) torus.

    ``states`` has shape ``(n_k, n_t, 2)`` with ``k`` covering ``[0, pi)``
    and ``t`` one period, both endpoints excluded. The k-wrap uses
    ``|u(k + pi)> = sigma_z |u(k)>``. Returns ``(chern, max_plaquette_flux)``;
    ``chern`` is None when some plaquette flux sits on the branch cut
    (a degeneracy enclosed by the plaquette), where the method is undefined.
    """
    u = np.asarray(states, dtype=complex)
    u_k = np.roll(u, -1, axis=0)
    u_k[-1] = u[0] @ SIGMA_Z.T
    u_t = np.roll(u, -1, axis=1)

    def link(a, b):
        z = np.einsum("...i,...i", a.conj(), b)
        return z / np.abs(z)

    Uk = link(u, u_k)
    Ut = link(u, u_t)
    plaquette = Uk * np.roll(Ut, -1, axis=0) * np.conj(np.roll(Uk, -1, axis=1)) * np.conj(Ut)
    flux = np.angle(plaquette)
    worst = float(np.max(np.abs(flux)))
    if worst > np.pi - 1e-6:
        return None, worst
    total = -flux.sum() / (2 * np.pi)
    return int(np.rint(total)), worst


def chern_number(p: DriveParams, n_k=None, n_t=None, link_shape=None) -> ChernResult:
    """Chern number of the lower band with an independent lattice cross-check.

    The raw value is the integral of ``F0 / 2pi`` on an ``n_k x n_t`` grid;
    it is reported as quantized when within ``QUANTIZED_TOL`` of an integer.
    The link-variable invariant on ``link_shape`` (default: the same grid)
    must agree, otherwise :class:`OracleMismatch` is raised.
    """
    n_k = n_k or p.n_k
    n_t = n_t or p.n_t
    grid = dataclasses.replace(p, n_k=n_k, n_t=n_t)
    F0 = static_curvature(grid)
    raw = F0.integral() / (2 * np.pi)
    integer = int(np.rint(raw))
    quantized = abs(raw - integer) < QUANTIZED_TOL

    lk, lt = link_shape or (n_k, n_t)
    lgrid = dataclasses.replace(p, n_k=lk, n_t=lt)
    k = lgrid.k_grid[:, None]
    t = lgrid.t_grid[None, :-1]
    states = eigensystem(FieldVector.from_array(field_array(p, k, p.phase(t))))[1]
    link, worst = link_variable_chern(states)
    if link is None:
        warnings.warn(
            f"link-variable invariant undefined (plaquette flux {worst:.3f} at the branch cut); "
            "cross-check skipped",
            RuntimeWarning,
            stacklevel=2,
        )
    elif quantized and link != integer:
        raise OracleMismatch(f"curvature integral gives {raw:.6f} but link variables give {link}")
    elif not quantized:
        warnings.warn(f"curvature integral {raw:.4f} is not quantized", RuntimeWarning, stacklevel=2)
    return ChernResult(raw, integer, quantized, link)
