import dataclasses

import numpy as np
import pytest

from sta_pump.errors import ConfigError, GaugeObstruction, SeamContact
from sta_pump.model import DriveParams, eigensystem, field_vector, fourier_unitary, lattice_k_grid, lower_state
from sta_pump.realspace import (
    home_site,
    pump_run,
    wannier_coefficients,
    wannier_state,
    wavepacket_stats,
)

P = DriveParams(n_k=32, n_t=256)
L = 32


def band_vectors(p, L):
    """Lattice vectors of the lower-band Bloch states."""
    U = fourier_unitary(L)
    u = lower_state(p, lattice_k_grid(L), 0.0)
    return np.stack([U[:, 2 * n] * u[n, 0] + U[:, 2 * n + 1] * u[n, 1] for n in range(L)], axis=1)


def test_wannier_normalized_and_in_lower_band():
    w = wannier_state(P, L)
    assert np.linalg.norm(w) == pytest.approx(1, abs=1e-12)
    U = fourier_unitary(L)
    coeffs = (U.conj().T @ w).reshape(L, 2)
    upper = eigensystem(field_vector(P, lattice_k_grid(L), 0.0))[0]
    assert np.max(np.abs(np.einsum("ni,ni->n", upper.conj(), coeffs))) < 1e-12


def test_wannier_projector_equals_band_projector():
    cells = np.stack([wannier_state(P, L, c) for c in range(L)], axis=1)
    V = band_vectors(P, L)
    np.testing.assert_allclose(cells @ cells.conj().T, V @ V.conj().T, atol=1e-10)


def test_wannier_localized_on_home_site():
    s = wavepacket_stats(wannier_state(P, L))
    assert s.W < 2
    assert s.X == pytest.approx(home_site(L // 2 - 1), abs=1e-9)
    # home cell moves the packet rigidly
    s2 = wavepacket_stats(wannier_state(P, L, 5))
    assert s2.X == pytest.approx(home_site(5), abs=1e-9)
    assert s2.W == pytest.approx(s.W, abs=1e-6)  # tails wrap differently around the ring


def test_wannier_gauge_fallback_warns():
    # Delta0 dominates with a negative z-field at t=0: south pole at k = pi/2
    p = DriveParams(phi0=np.pi, n_k=32, n_t=64)
    with pytest.warns(GaugeObstruction):
        c = wannier_coefficients(p, L)
    assert np.allclose(np.linalg.norm(c), 1)


def test_wannier_size_guard():
    with pytest.raises(ConfigError):
        wannier_state(P, 8)
    with pytest.raises(ConfigError):
        wannier_state(P, L, L)


def test_stats_simple_states():
    psi = np.zeros(40)
    psi[17] = 1
    s = wavepacket_stats(psi)
    assert (s.X, s.W) == (17, 0)
    psi = np.zeros(40)
    psi[[10, 12]] = 1 / np.sqrt(2)
    s = wavepacket_stats(psi)
    assert s.X == pytest.approx(11) and s.W == pytest.approx(1)
    assert s.dX == 0 and s.dW == 0


def test_stats_relative_to_reference():
    ref = wavepacket_stats(np.eye(40)[10])
    s = wavepacket_stats(np.eye(40)[14], 1.0, ref)
    assert s.dX == 4 and s.dX_over_d == 2


def test_seam_guard():
    psi = np.zeros(40)
    psi[[2, 20]] = [1e-2, np.sqrt(1 - 1e-4)]
    with pytest.raises(SeamContact):
        wavepacket_stats(psi)


def test_pump_run_conserves_probability():
    run = pump_run(P, L)
    np.testing.assert_allclose(run.density.sum(axis=1), 1, atol=1e-10)
    assert run.density.shape == (P.n_t + 1, 2 * L)
    assert np.all(run.stats.W >= 0)


def test_statp_moves_one_cell():
    run = pump_run(P, L)
    assert run.stats.dX_over_d[-1] == pytest.approx(1, abs=0.01)


def test_tp_fast_breaks_transport():
    run = pump_run(P, L, scheme="TP")
    assert abs(run.stats.dX_over_d[-1]) < 0.3


def test_statp_width_change_ordering():
    dW = [pump_run(dataclasses.replace(P, omega=w), L).stats.dW[-1] for w in (1.0, 10.0, 100.0)]
    assert dW[0] > dW[1] > dW[2]


@pytest.mark.xfail(strict=True, reason="the k-dependent Berry phase deforms the packet; see decisions ledger")
def test_statp_density_translated_by_one_cell():
    run = pump_run(P, L)
    moved = np.roll(run.density[0], 2)
    assert np.abs(run.density[-1] - moved).sum() < 1e-3


def test_dense_and_bloch_routes_agree():
    a = pump_run(P, 16, method="dense")
    b = pump_run(P, 16, method="bloch")
    np.testing.assert_allclose(a.density, b.density, atol=1e-10)


def test_multi_period_run():
    run = pump_run(P, L, periods=2)
    assert run.stats.dX_over_d[-1] == pytest.approx(2, abs=0.02)
