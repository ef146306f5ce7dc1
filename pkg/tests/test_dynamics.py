from __future__ import annotations

import dataclasses
import warnings

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from omitq.dynamics import (DriveSchedule, IntegrationError, apply_generator, default_step, evolve,
                            polaron_projector, populations_polaron, transistor_schedule)
from omitq.fock import ModeSpace, fock_density, thermal_state
from omitq.model import SystemParams, build_generator
from omitq.response import steady_state

from oracle_values import EXP_MINUS_001


def _random_state(d, rng):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


# -- schedules ------------------------------------------------------------------

def test_schedule_interpolation_and_extrapolation():
    s = DriveSchedule(((0, 0.0), (10, 1.0)))
    assert s(-5) == 0.0 and s(5) == pytest.approx(0.5) and s(50) == 1.0
    p = DriveSchedule(((0, 0.0), (10, 1.0)), mode="power")
    assert p(5) == pytest.approx(np.sqrt(0.5))
    assert DriveSchedule.constant(0.3)(123.0) == pytest.approx(0.3)


@pytest.mark.parametrize("knots", [(), ((1, 0.0), (1, 1.0)), ((2, 0.0), (1, 1.0)), ((0, 1.5),)])
def test_schedule_validation(knots):
    with pytest.raises(ValueError):
        DriveSchedule(knots)


def test_transistor_schedule_shape():
    s = transistor_schedule(100, 1000, mode="power")
    assert [t for t, _ in s.knots] == [0, 100, 1100, 1200]
    assert s(50) == pytest.approx(np.sqrt(0.5))
    assert s(600) == 1.0 and s(2000) == 0.0


# -- generator application -------------------------------------------------------

def test_single_photon_decay_rate():
    p = SystemParams(kappa=0.3, gamma_m=1e-3, g0=0.0)
    gen = build_generator(p, ModeSpace(3, 2))
    d = apply_generator(gen, fock_density(gen.space, 1, 0))
    n_a = (gen.a.conj().T @ gen.a).toarray()
    assert np.real(np.trace(n_a @ d)) == pytest.approx(-0.3, abs=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 0.2), st.floats(0.0, 2.0), st.floats(0.0, 7.0))
def test_generator_is_traceless_and_hermitian(seed, g0, n_th, t):
    rng = np.random.default_rng(seed)
    p = SystemParams(kappa=0.2, gamma_m=0.01, g0=g0, eps_c=0.05, eps_p=0.01, delta_c=-1.0, delta_p=0.3, n_th=n_th)
    gen = build_generator(p, ModeSpace(3, 4))
    out = apply_generator(gen, _random_state(gen.space.dim, rng), t)
    assert abs(np.trace(out)) <= 1e-12
    assert np.abs(out - out.conj().T).max() <= 1e-12


def test_thermal_state_is_fixed_point():
    n_th = 0.5
    p = SystemParams(kappa=0.1, gamma_m=0.02, g0=0.0, n_th=n_th)
    space = ModeSpace(2, 40)
    gen = build_generator(p, space)
    rho = np.kron(np.diag([1.0, 0.0]), thermal_state(40, n_th))
    out = apply_generator(gen, rho)
    tail = (n_th / (1 + n_th)) ** 40
    assert np.abs(out).max() <= 10 * p.gamma_m * (1 + n_th) * 40 * tail


def test_dimension_mismatch():
    gen = build_generator(SystemParams(0.1, 1e-3, 0.0), ModeSpace(2, 3))
    with pytest.raises(ValueError):
        apply_generator(gen, np.eye(4) / 4)
    with pytest.raises(ValueError):
        evolve(gen, np.eye(4) / 4, (0, 1))


# -- integration -----------------------------------------------------------------

def test_photon_decay_matches_exponential():
    p = SystemParams(kappa=0.3, gamma_m=1e-3, g0=0.0)
    gen = build_generator(p, ModeSpace(3, 2))
    traj = evolve(gen, fock_density(gen.space, 1, 0), (0.0, 20.0), sample_every=10)
    np.testing.assert_allclose(traj.n_photon, np.exp(-p.kappa * traj.times), atol=1e-8, rtol=0)


def test_thermal_relaxation():
    n_th, gm = 0.5, 0.05
    p = SystemParams(kappa=0.1, gamma_m=gm, g0=0.0, n_th=n_th)
    nb = 30
    gen = build_generator(p, ModeSpace(2, nb))
    traj = evolve(gen, fock_density(gen.space, 0, 0), (0.0, 400.0), sample_every=50)
    tail = nb * (n_th / (1 + n_th)) ** nb
    expected = n_th * (1 - np.exp(-gm * traj.times))
    np.testing.assert_allclose(traj.n_phonon, expected, atol=1e-6 + tail, rtol=0)
    assert traj.n_phonon[-1] == pytest.approx(n_th, abs=1e-6 + tail)


def test_zero_generator_is_identity_for_a_million_steps():
    gen = build_generator(SystemParams(0.1, 1e-3, 0.0), ModeSpace(2, 2))
    zero = sp.csr_matrix((4, 4), dtype=complex)
    gen = dataclasses.replace(gen, h_bare=zero, h_control=zero, channels=(), _cache={})
    rho0 = _random_state(4, np.random.default_rng(0))
    traj = evolve(gen, rho0, (0.0, 1.0e6), dt=1.0, sample_every=10 ** 4)
    assert len(traj.times) == 101
    assert np.abs(traj.trace - traj.trace[0]).max() < 1e-12
    assert np.abs(traj.final_state - rho0).max() < 1e-12


def test_linearity():
    p = SystemParams(kappa=0.2, gamma_m=0.02, g0=0.1, eps_c=0.05, eps_p=0.01, delta_c=-1.0, delta_p=0.1, n_th=0.3)
    gen = build_generator(p, ModeSpace(3, 5))
    rng = np.random.default_rng(7)
    r1, r2 = _random_state(15, rng), _random_state(15, rng)
    f = lambda r: evolve(gen, r, (0.0, 30.0)).final_state  # noqa: E731
    np.testing.assert_allclose(f(0.5 * (r1 + r2)), 0.5 * (f(r1) + f(r2)), atol=1e-12)


@pytest.fixture(scope="module")
def probed_fig2():
    p = SystemParams(kappa=0.025, gamma_m=1e-3, g0=0.1, eps_c=1e-2, eps_p=1e-3, delta_c=-1.0, delta_p=0.01)
    gen = build_generator(p, ModeSpace(3, 8))
    return gen, steady_state(gen.without_probe())


def test_step_halving_changes_observables_little(probed_fig2):
    gen, rho0 = probed_fig2
    h = default_step(gen)
    coarse = evolve(gen, rho0, (0.0, 64 * np.pi), dt=h, sample_every=10)
    fine = evolve(gen, rho0, (0.0, 64 * np.pi), dt=h / 2, sample_every=20)
    np.testing.assert_allclose(fine.times, coarse.times)
    for name in ("a", "n_photon", "n_phonon"):
        c, f = getattr(coarse, name), getattr(fine, name)
        assert np.abs(c - f).max() <= 1e-6 * np.abs(f).max(), name


def test_fourth_order_convergence(probed_fig2):
    gen, rho0 = probed_fig2
    h = 4 * default_step(gen)
    ends = [evolve(gen, rho0, (0.0, 20.0), dt=h / k).final_state for k in (1, 2, 4)]
    ratio = np.abs(ends[0] - ends[1]).max() / np.abs(ends[1] - ends[2]).max()
    assert ratio == pytest.approx(16, rel=0.1)


def test_trace_conserved_to_roundoff(probed_fig2):
    gen, rho0 = probed_fig2
    traj = evolve(gen, rho0, (0.0, 500.0), sample_every=100)
    assert np.abs(traj.trace - 1).max() < 1e-12


def test_long_evolution_reaches_linear_steady_state():
    p = SystemParams(kappa=0.2, gamma_m=0.05, g0=0.1, eps_c=0.05, delta_c=-1.0, n_th=0.3)
    gen = build_generator(p, ModeSpace(4, 8))
    rho = evolve(gen, fock_density(gen.space, 0, 0), (0.0, 800.0), sample_every=1000).final_state
    assert np.abs(rho - steady_state(gen)).max() <= 1e-7


def test_snapshots_and_observables():
    p = SystemParams(kappa=0.3, gamma_m=1e-3, g0=0.0)
    gen = build_generator(p, ModeSpace(3, 2))
    n_a = (gen.a.conj().T @ gen.a)
    traj = evolve(gen, fock_density(gen.space, 1, 0), (0.0, 2.0), dt=0.01, snapshot_times=(1.0,),
                  observables={"n": n_a})
    assert set(traj.snapshots) == {1.0}
    assert np.real(np.trace(n_a @ traj.snapshots[1.0])) == pytest.approx(np.exp(-0.3), abs=1e-9)
    np.testing.assert_allclose(traj.observables["n"].real, traj.n_photon)
    assert np.all(np.diff(traj.times) > 0)


def test_trace_drift_is_reported():
    p = SystemParams(kappa=0.2, gamma_m=0.02, g0=0.1, eps_c=0.05, eps_p=0.02, delta_c=-1.0, delta_p=0.2)
    gen = build_generator(p, ModeSpace(4, 12))
    with pytest.raises(IntegrationError, match="time step"):
        evolve(gen, fock_density(gen.space, 0, 0), (0.0, 2000.0), dt=1.5, sample_every=10)


# -- polaron populations ------------------------------------------------------------

def test_populations_without_coupling_are_bare_diagonal():
    p = SystemParams(kappa=0.1, gamma_m=1e-3, g0=0.0)
    space = ModeSpace(3, 4)
    rho = _random_state(space.dim, np.random.default_rng(2))
    np.testing.assert_allclose(populations_polaron(rho, p, space).ravel(), np.real(np.diag(rho)), atol=1e-14)


def test_single_photon_population_is_franck_condon():
    p = SystemParams(kappa=0.1, gamma_m=1e-3, g0=0.1)
    space = ModeSpace(3, 30)
    pops = populations_polaron(fock_density(space, 1, 0), p, space)
    assert pops[1, 0] == pytest.approx(EXP_MINUS_001, abs=1e-10)
    proj = polaron_projector(p, space, 1, 0)
    assert np.real(np.trace(proj @ fock_density(space, 1, 0))) == pytest.approx(pops[1, 0], abs=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 0.3))
def test_populations_complete(seed, g0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = SystemParams(kappa=0.1, gamma_m=1e-3, g0=g0, n_th=0.0)
    space = ModeSpace(3, 12)
    rho = _random_state(space.dim, np.random.default_rng(seed))
    pops = populations_polaron(rho, p, space)
    assert pops.min() >= -1e-10
    assert pops.sum() == pytest.approx(1.0, abs=1e-8)
