from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from omitq import response
from omitq.dynamics import evolve
from omitq.fock import ModeSpace, thermal_state
from omitq.liouville import LiouvilleSolver, SolverError
from omitq.model import SystemParams, build_generator
from omitq.response import (ResonanceDegeneracyError, SidebandDecomposition, WindowAlignmentError, demodulate,
                            normalized_transmission, sidebands_linear_response, sidebands_time_domain,
                            steady_state)

from oracle_values import FIG2_CLASSICAL_DIP, FIG2_GAMMA_OPT


def _linear_cavity(delta_p, kappa):
    return 1j / (1j * delta_p - kappa / 2)


# -- demodulation -------------------------------------------------------------------

def _grid(omega, periods=7, per_period=64):
    period = 2 * np.pi / omega
    return np.arange(periods * per_period + 1) * (period / per_period)


@settings(max_examples=30, deadline=None)
@given(st.complex_numbers(max_magnitude=2), st.complex_numbers(max_magnitude=2), st.complex_numbers(max_magnitude=2),
       st.floats(0.2, 3.0), st.floats(1e-4, 1.0))
def test_demodulate_recovers_synthetic_components(c0, cp, cm, omega, eps_p):
    t = _grid(omega)
    a = c0 + cp * np.exp(-1j * omega * t) + cm * np.exp(1j * omega * t)
    d = demodulate(t, a, omega, eps_p, kappa=0.1)
    assert abs(d.alpha - c0) <= 1e-10
    assert abs(d.delta_a_plus - cp / eps_p) <= 1e-10 / eps_p
    assert abs(d.delta_a_minus - cm / eps_p) <= 1e-10 / eps_p
    assert d.harmonic_2_magnitude <= 1e-10 / eps_p


def test_second_harmonic_is_orthogonal():
    omega, eps_p = 1.3, 1e-2
    t = _grid(omega)
    base = 0.2 + 0.4j * np.exp(-1j * omega * t) - 0.1 * np.exp(1j * omega * t)
    clean = demodulate(t, base, omega, eps_p, 0.1)
    dirty = demodulate(t, base + 0.05j * np.exp(-2j * omega * t), omega, eps_p, 0.1)
    assert abs(dirty.delta_a_plus - clean.delta_a_plus) <= 1e-10
    assert abs(dirty.delta_a_minus - clean.delta_a_minus) <= 1e-10
    assert dirty.harmonic_2_magnitude == pytest.approx(0.05 / eps_p, rel=1e-10)
    assert dirty.harmonic_flagged and not clean.harmonic_flagged


def test_window_alignment_and_arguments():
    omega = 1.0
    t = np.linspace(0, 40, 1001)  # step 0.04 does not divide 2 pi
    with pytest.raises(WindowAlignmentError):
        demodulate(t, np.ones_like(t), omega, 1e-3, 0.1)
    short = _grid(omega, periods=3)
    with pytest.raises(WindowAlignmentError):
        demodulate(short, np.ones_like(short), omega, 1e-3, 0.1, window=5)
    with pytest.raises(ValueError):
        demodulate(_grid(omega), np.ones(7 * 64 + 1), omega, 0.0, 0.1)


# -- normalized transmission ------------------------------------------------------

def test_transmission_examples():
    kappa = 0.025
    assert normalized_transmission(_linear_cavity(0.0, kappa), 0.0, kappa) == pytest.approx(1.0, rel=1e-14)
    assert normalized_transmission(0.0, 0.0, kappa) == 0.0
    # linearized probe response at the red-sideband dip
    plus = 2 / (kappa * (1 + FIG2_GAMMA_OPT / 1e-3))
    assert normalized_transmission(plus, 0.0, kappa) == pytest.approx(FIG2_CLASSICAL_DIP, rel=1e-12)


def test_decomposition_stores_transmission():
    d = SidebandDecomposition.from_amplitudes(0.1, 3 + 4j, 1j, kappa=0.2)
    assert d.transmission == pytest.approx(0.01 * (25 + 1), rel=1e-15)


# -- steady state ---------------------------------------------------------------------

def test_undriven_steady_state_is_thermal():
    n_th = 0.5
    p = SystemParams(kappa=0.1, gamma_m=0.05, g0=0.1, n_th=n_th)
    nb = 30
    gen = build_generator(p, ModeSpace(2, nb))
    rho = steady_state(gen)
    expected = np.kron(np.diag([1.0, 0.0]), thermal_state(nb, n_th))
    assert np.abs(rho - expected).max() <= 1e-10
    n_b = np.real(np.trace((gen.b.conj().T @ gen.b) @ rho))
    assert n_b == pytest.approx(n_th, abs=nb * (n_th / (1 + n_th)) ** nb + 1e-10)


def test_linear_cavity_coherent_amplitude():
    p = SystemParams(kappa=0.2, gamma_m=0.01, g0=0.0, eps_c=0.01, delta_c=-0.7)
    gen = build_generator(p, ModeSpace(6, 2))
    a = np.trace(gen.a @ steady_state(gen))
    assert abs(a - 1j * p.eps_c / (1j * p.delta_c - p.kappa / 2)) <= 1e-10


def test_steady_state_deterministic(fig2_params):
    s = ModeSpace(3, 6)
    r1 = steady_state(build_generator(fig2_params, s))
    r2 = steady_state(build_generator(fig2_params, s))
    assert np.array_equal(r1, r2)
    assert np.abs(LiouvilleSolver(build_generator(fig2_params, s)).apply(r1)).max() <= 1e-10


def test_steady_state_matches_long_evolution(fig2_params):
    gen = build_generator(fig2_params, ModeSpace(3, 8))
    n_op = gen.a.conj().T @ gen.a
    solved = np.real(np.trace(n_op @ steady_state(gen)))
    evolved = np.real(np.trace(n_op @ steady_state(gen, method="evolve")))
    assert abs(solved - evolved) <= 1e-7


def test_auto_falls_back_to_evolution(monkeypatch):
    p = SystemParams(kappa=0.3, gamma_m=0.1, g0=0.1, eps_c=0.05, delta_c=-1.0)
    gen = build_generator(p, ModeSpace(3, 4))
    reference = steady_state(gen)

    def broken(self):
        raise SolverError("forced failure")

    monkeypatch.setattr(LiouvilleSolver, "steady_state", broken)
    with pytest.raises(SolverError):
        steady_state(gen, method="direct")
    assert np.abs(steady_state(gen) - reference).max() <= 1e-8


def test_steady_state_rejects_probe(fig2_params):
    gen = build_generator(fig2_params.replace(eps_p=1e-3, delta_p=0.1), ModeSpace(3, 4))
    with pytest.raises(ValueError):
        steady_state(gen)


# -- sidebands -----------------------------------------------------------------------

@pytest.mark.parametrize("delta_p", [-0.3, 0.0, 0.05, 0.7])
def test_linear_response_matches_linear_cavity(delta_p):
    p = SystemParams(kappa=0.2, gamma_m=0.01, g0=0.0, eps_c=0.01, delta_c=-1.0, delta_p=delta_p, eps_p=1e-3)
    gen = build_generator(p, ModeSpace(6, 2))
    plus, minus = sidebands_linear_response(gen, steady_state(gen.without_probe()), gen.omega_b)
    assert abs(plus - _linear_cavity(delta_p, p.kappa)) <= 1e-10
    assert abs(minus) <= 1e-10


def test_zero_beat_is_rejected():
    p = SystemParams(kappa=0.2, gamma_m=0.01, g0=0.1, eps_c=0.01, delta_c=-1.0)
    gen = build_generator(p, ModeSpace(3, 4))
    with pytest.raises(ResonanceDegeneracyError):
        sidebands_linear_response(gen, steady_state(gen), 0.0)


def test_output_coupling_does_not_enter():
    p = SystemParams(kappa=0.2, gamma_m=0.02, g0=0.1, eps_c=0.05, delta_c=-1.0, delta_p=0.1, eps_p=1e-3)
    values = []
    for k_out in (0.2, 0.05):
        gen = build_generator(p.replace(kappa_out=k_out), ModeSpace(3, 6))
        plus, minus = sidebands_linear_response(gen, steady_state(gen.without_probe()), gen.omega_b)
        values.append(normalized_transmission(plus, minus, p.kappa))
    assert values[0] == values[1]


def test_time_domain_linear_cavity():
    p = SystemParams(kappa=0.2, gamma_m=0.05, g0=0.0, eps_c=0.01, delta_c=-0.5, delta_p=0.3, eps_p=1e-3)
    d = sidebands_time_domain(p, ModeSpace(6, 2))
    assert abs(d.delta_a_plus - _linear_cavity(p.delta_p, p.kappa)) <= 1e-6
    assert abs(d.delta_a_minus) <= 1e-6
    assert abs(d.alpha - 1j * p.eps_c / (1j * p.delta_c - p.kappa / 2)) <= 1e-6


def test_time_domain_approaches_linear_response_as_probe_weakens():
    base = SystemParams(kappa=0.1, gamma_m=0.02, g0=0.1, eps_c=0.05, delta_c=-1.0, delta_p=0.01)
    space = ModeSpace(3, 6)
    gen = build_generator(base.replace(eps_p=1e-3), space)
    plus, minus = sidebands_linear_response(gen, steady_state(gen.without_probe()), gen.omega_b)
    errors = []
    for eps_p in (base.eps_c / 100, base.eps_c / 1000):
        d = sidebands_time_domain(base.replace(eps_p=eps_p), space)
        err = max(abs(abs(d.delta_a_plus) / abs(plus) - 1), abs(abs(d.delta_a_minus) / abs(minus) - 1))
        assert err <= 1e-3
        errors.append(err)
    assert errors[1] < errors[0]


def test_stationarity_failure_is_reported(monkeypatch):
    p = SystemParams(kappa=0.2, gamma_m=0.05, g0=0.0, eps_c=0.01, delta_c=-0.5, delta_p=0.3, eps_p=1e-3)
    with pytest.raises(response.StationarityError):
        sidebands_time_domain(p, ModeSpace(3, 2), relax=1.0, stationarity_tol=1e-15, max_doublings=1)


def test_evolution_from_steady_state_stays_put(fig2_params):
    gen = build_generator(fig2_params, ModeSpace(3, 6))
    rho = steady_state(gen)
    traj = evolve(gen, rho, (0.0, 100.0), sample_every=100)
    assert np.abs(traj.final_state - rho).max() <= 1e-8
