import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

import sta_pump.evolution as evolution
from sta_pump.errors import ConfigError, StiffnessExceeded
from sta_pump.evolution import (
    EvolutionConfig,
    adiabatic_reference,
    evolve_k,
    evolve_lattice,
    plan_steps,
    step_two_level,
)
from sta_pump.model import (
    SIGMA_X,
    DriveParams,
    Scheme,
    eigensystem,
    field_vector,
    fourier_unitary,
    lattice_k_grid,
    lower_state,
)

P = DriveParams(n_k=64, n_t=256)
OMEGAS = [0.1, 1.0, 10.0, 1e3, 1e6, 1e10]


def overlap(a, b):
    return np.einsum("...i,...i", np.conj(a), b)


def test_step_two_level_examples():
    s = np.array([1, 0], dtype=complex)
    np.testing.assert_array_equal(step_two_level(np.zeros((2, 2)), 0.3, s), s)
    np.testing.assert_allclose(step_two_level(SIGMA_X, np.pi / 2, s), [0, -1j], atol=1e-15)


def test_step_two_level_matches_matrix_exponential():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(10000, 2, 2)) + 1j * rng.normal(size=(10000, 2, 2))
    H = A + np.conj(np.swapaxes(A, -1, -2))
    s = rng.normal(size=(10000, 2)) + 1j * rng.normal(size=(10000, 2))
    s /= np.linalg.norm(s, axis=-1, keepdims=True)
    dt = rng.uniform(0.01, 2.0, size=10000)
    out = step_two_level(H, dt, s)
    assert np.max(np.abs(np.linalg.norm(out, axis=-1) - 1)) < 1e-14
    for i in range(0, 10000, 500):
        np.testing.assert_allclose(out[i], expm(-1j * H[i] * dt[i]) @ s[i], atol=1e-12)


def test_statp_follows_eigenstate_over_one_period():
    t, s = evolve_k(P, P.k_grid)
    fid = np.abs(overlap(lower_state(P, P.k_grid, 0.0), s[:, -1])) ** 2
    assert fid.min() > 1 - 1e-6
    assert len(t) == P.n_t + 1 and s.shape == (64, P.n_t + 1, 2)


def test_tp_adiabatic_limit():
    p = DriveParams(omega=0.01, n_k=64, n_t=64, scheme="TP")
    _, s = evolve_k(p, p.k_grid)
    fid = np.abs(overlap(lower_state(p, p.k_grid, 0.0), s[:, -1])) ** 2
    assert fid.min() > 1 - 1e-3


@pytest.mark.parametrize("scheme", ["TP", "STATP"])
def test_time_reversal(scheme):
    k = P.k_grid[::8]
    _, fwd = evolve_k(P, k, scheme=scheme, initial=lower_state(P, k, 0.0))
    _, back = evolve_k(P, k, scheme=scheme, initial=fwd[:, -1], backward=True)
    np.testing.assert_allclose(back[:, -1], lower_state(P, k, 0.0), atol=1e-10)


def test_initial_state_must_be_normalized():
    with pytest.raises(ConfigError):
        evolve_k(P, 0.3, initial=[1.0, 1.0])


def test_stiffness_budget():
    with pytest.raises(StiffnessExceeded):
        plan_steps(DriveParams(omega=10.0, n_t=64), EvolutionConfig(substep_cap=1e-7), [0.3])


@pytest.mark.parametrize("kw", [dict(steps_per_period=8), dict(substep_cap=0), dict(time_variable="x"), dict(periods=0)])
def test_invalid_evolution_config(kw):
    with pytest.raises(ConfigError):
        EvolutionConfig(**kw)


def test_unitarity_all_frequencies():
    for w in OMEGAS:
        for scheme in ("TP", "STATP"):
            p = dataclasses.replace(P, omega=w, n_k=16)
            _, s = evolve_k(p, p.k_grid, scheme=scheme, cfg=EvolutionConfig(periods=2))
            assert np.max(np.abs(np.linalg.norm(s, axis=-1) - 1)) < 1e-10


def test_second_order_convergence():
    p = DriveParams(n_t=16)
    k = np.array([0.3, 1.0, 2.2])
    ref = evolve_k(p, k, EvolutionConfig(steps_per_period=2**16))[1][:, -1]
    errs = [np.abs(evolve_k(p, k, EvolutionConfig(steps_per_period=n))[1][:, -1] - ref).max() for n in (256, 512, 1024)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    np.testing.assert_allclose(ratios, 4.0, rtol=0.05)


def test_scaled_phase_matches_physical_time():
    k = P.k_grid[::4]
    a = evolve_k(P, k)[1]
    b = evolve_k(P, k, EvolutionConfig(time_variable="scaled_phase"))[1]
    assert np.max(np.abs(a - b)) < 1e-10
    assert evolution.uses_scaled_phase(dataclasses.replace(P, omega=1e3), EvolutionConfig())


def test_transitionless_at_all_frequencies():
    for w in OMEGAS:
        p = dataclasses.replace(P, omega=w, n_k=32)
        t, s = evolve_k(p, p.k_grid)
        up = eigensystem(field_vector(p, p.k_grid[:, None], t[None, :]))[0]
        assert np.max(np.abs(overlap(up, s)) ** 2) < 1e-10, w


def test_adiabatic_reference_start_and_overlap():
    k = np.array([0.2, 0.9, 1.3, 2.0, 2.9])  # away from the south-pole point k = pi/2
    for w in (0.1, 10.0, 1e6):
        p = dataclasses.replace(P, omega=w)
        t, ref, phase = adiabatic_reference(p, k)
        np.testing.assert_allclose(ref[:, 0], lower_state(p, k, 0.0), atol=1e-15)
        assert np.all(phase.alpha[:, 0] == 0) and np.all(phase.gamma[:, 0] == 0)
        assert np.isrealobj(phase.alpha) and np.isrealobj(phase.gamma)
        _, s = evolve_k(p, k)
        assert np.max(np.abs(overlap(ref, s) - 1)) < 1e-4
        assert np.min(np.abs(overlap(ref, s))) > 1 - 1e-6


def test_geometric_phase_resolution_independent():
    k = np.array([0.4, 1.2, 2.5])
    g = [adiabatic_reference(P, k, EvolutionConfig(steps_per_period=n))[2].gamma[:, -1] for n in (4096, 8192)]
    assert np.max(np.abs(g[0] - g[1])) < 1e-8


@pytest.mark.parametrize("scheme", ["TP", "STATP"])
def test_lattice_matches_bloch_sectors(scheme):
    L = 16
    p = DriveParams(n_t=128)
    rng = np.random.default_rng(1)
    psi0 = rng.normal(size=2 * L) + 1j * rng.normal(size=2 * L)
    psi0 /= np.linalg.norm(psi0)
    cfg = EvolutionConfig(steps_per_period=1024)
    _, lat = evolve_lattice(p, L, cfg, initial=psi0, scheme=scheme)
    U = fourier_unitary(L)
    blocks = (lat @ U.conj()).reshape(len(lat), L, 2)  # U^dagger psi for every frame
    coeffs0 = (U.conj().T @ psi0).reshape(L, 2)
    weight = np.linalg.norm(coeffs0, axis=-1, keepdims=True)
    _, ks = evolve_k(p, lattice_k_grid(L), cfg, initial=coeffs0 / weight, scheme=scheme)
    ks = ks * weight[:, None, :]
    assert np.max(np.abs(np.moveaxis(ks, 1, 0) - blocks)) < 1e-8
    _, via_bloch = evolve_lattice(p, L, cfg, initial=psi0, scheme=scheme, method="bloch")
    assert np.max(np.abs(via_bloch - lat)) < 1e-8


def test_lattice_zero_hamiltonian(monkeypatch):
    L = 8
    monkeypatch.setattr(evolution, "_lattice_generator", lambda *a: np.zeros((2 * L, 2 * L)))
    psi0 = np.zeros(2 * L, complex)
    psi0[3] = 1
    _, s = evolve_lattice(DriveParams(n_t=16), L, EvolutionConfig(steps_per_period=64), initial=psi0)
    assert np.all(s == psi0)


def test_lattice_norm_drift():
    L = 32
    psi0 = np.zeros(2 * L, complex)
    psi0[L] = 1
    _, s = evolve_lattice(DriveParams(n_t=256), L, EvolutionConfig(steps_per_period=1024), initial=psi0)
    assert np.max(np.abs(np.linalg.norm(s, axis=-1) - 1)) < 1e-10


@given(st.floats(0, np.pi), st.sampled_from(OMEGAS))
@settings(max_examples=20, deadline=None)
def test_norm_preserved_any_momentum(k, w):
    p = DriveParams(omega=w, n_t=32, n_k=8)
    _, s = evolve_k(p, k, EvolutionConfig(steps_per_period=256), scheme=Scheme.TP)
    assert np.max(np.abs(np.linalg.norm(s, axis=-1) - 1)) < 1e-10
