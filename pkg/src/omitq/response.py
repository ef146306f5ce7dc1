"""Steady states, probe sidebands and the normalized transmission.

Two independent routes produce the sideband amplitudes ``delta_a_plus`` and
``delta_a_minus`` (coefficients of ``exp(-i w_b t)`` and ``exp(+i w_b t)``
in ``<a>(t)``, per unit probe amplitude):

* :func:`sidebands_linear_response` solves the first-order equations
  ``(L0 +/- i w_b) rho_pm = i [a^dag or a, rho_ss]`` directly;
* :func:`sidebands_time_domain` integrates the driven master equation to its
  periodic steady state and demodulates ``<a>(t)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .dynamics import IntegrationError, default_step, evolve
from .fock import thermal_state
from .liouville import AmbiguousSteadyStateError, LiouvilleSolver, SolverError
from .model import build_generator

__all__ = [
    "SidebandDecomposition",
    "ResonanceDegeneracyError",
    "WindowAlignmentError",
    "StationarityError",
    "steady_state",
    "steady_state_by_evolution",
    "demodulate",
    "sidebands_linear_response",
    "sidebands_time_domain",
    "normalized_transmission",
]

log = logging.getLogger(__name__)

HARMONIC_FLAG_RATIO = 0.05


class ResonanceDegeneracyError(SolverError):
    """The shifted generator ``L0 +/- i w_b`` is singular."""


class WindowAlignmentError(ValueError):
    """Demodulation window does not span an integer number of beat periods."""


class StationarityError(RuntimeError):
    """Sidebands kept drifting after the allowed number of evolution extensions."""


def normalized_transmission(delta_a_plus, delta_a_minus, kappa):
    """``kappa**2 / 4 * (|delta_a_plus|**2 + |delta_a_minus|**2)``."""
    return kappa ** 2 / 4 * (np.abs(delta_a_plus) ** 2 + np.abs(delta_a_minus) ** 2)


@dataclass(frozen=True)
class SidebandDecomposition:
    alpha: complex
    delta_a_plus: complex
    delta_a_minus: complex
    harmonic_2_magnitude: float
    transmission: float

    @classmethod
    def from_amplitudes(cls, alpha, delta_a_plus, delta_a_minus, kappa, harmonic_2=0.0):
        return cls(complex(alpha), complex(delta_a_plus), complex(delta_a_minus), float(harmonic_2),
                   float(normalized_transmission(delta_a_plus, delta_a_minus, kappa)))

    @property
    def harmonic_flagged(self) -> bool:
        first = abs(self.delta_a_plus) + abs(self.delta_a_minus)
        return self.harmonic_2_magnitude > HARMONIC_FLAG_RATIO * first


def steady_state_by_evolution(gen, *, tol=1e-10, t_max=None, rho0=None, dt=None):
    """Long-time integration until ``max|L0 rho| <= tol`` or a chunk of ``2 / slowest rate``
    changes no element by more than ``tol``.

    The second test matters because a fixed-step integrator settles on its
    own fixed point, whose residual under the exact generator is of the
    order of the truncation error (a few 1e-10 at the default step).
    """
    if not gen.is_time_independent:
        raise ValueError("steady state requires a time-independent generator (probe off)")
    solver = LiouvilleSolver(gen, method="iterative")
    space, p = gen.space, gen.params
    if rho0 is None:
        rho0 = np.kron(np.diag([1.0] + [0.0] * (space.n_photon_levels - 1)),
                       thermal_state(space.n_phonon_levels, p.n_th))
    slowest = min(r for r, _ in gen.channels)
    chunk = 2.0 / slowest
    t_max = 100.0 / slowest if t_max is None else t_max
    rho, t = np.asarray(rho0, dtype=complex), 0.0
    while t < t_max:
        prev = rho
        rho = evolve(gen, rho, (t, t + chunk), dt=dt, sample_every=10 ** 9).final_state
        t += chunk
        if np.abs(solver.apply(rho)).max() <= tol or np.abs(rho - prev).max() <= tol:
            return rho / np.trace(rho).real
    raise IntegrationError(f"no stationary state reached within t = {t_max:g}")


def steady_state(gen, method="auto", solver=None):
    """Stationary density matrix of a time-independent generator.

    ``method`` is ``'auto'`` (linear solve, falling back to long-time
    evolution on a numerical failure), ``'direct'``, ``'iterative'`` or
    ``'evolve'``.

    Raises
    ------
    AmbiguousSteadyStateError
        If the null space of the generator is degenerate.
    """
    if not gen.is_time_independent:
        raise ValueError("steady state requires a time-independent generator (probe off)")
    if method == "evolve":
        return steady_state_by_evolution(gen)
    if solver is None:
        solver = LiouvilleSolver(gen, method="auto" if method == "auto" else method)
    try:
        return solver.steady_state()
    except AmbiguousSteadyStateError:
        raise
    except SolverError:
        if method != "auto":
            raise
        log.warning("linear steady-state solve failed; falling back to time evolution")
        return steady_state_by_evolution(gen)


def sidebands_linear_response(gen, rho_ss, omega_b, solver=None, *, guess=None, return_states=False):
    """First-order probe response ``(delta_a_plus, delta_a_minus)`` per unit probe amplitude.

    ``guess`` takes the ``(rho_plus, rho_minus)`` pair of a nearby beat
    frequency as a warm start; ``return_states=True`` appends that pair to
    the result.

    Raises
    ------
    ResonanceDegeneracyError
        If ``omega_b`` is zero or the shifted generator is singular.
    """
    if omega_b == 0:
        raise ResonanceDegeneracyError("beat frequency is zero; sidebands are undefined")
    if solver is None:
        solver = LiouvilleSolver(gen)
    a = gen.a
    ad = a.conj().T.tocsr()
    rho_ss = np.asarray(rho_ss, dtype=complex)
    guess = (None, None) if guess is None else guess
    out, states = [], []
    for op, shift, x0 in ((ad, 1j * omega_b, guess[0]), (a, -1j * omega_b, guess[1])):
        rhs = 1j * (op @ rho_ss - (op.T @ rho_ss.T).T)
        try:
            x = solver.solve(rhs, shift, x0=x0)
        except SolverError as exc:
            raise ResonanceDegeneracyError(
                f"shifted generator singular at omega_b = {omega_b:g}: {exc}") from exc
        states.append(x)
        out.append(complex(a.multiply(x.T).sum()))
    if return_states:
        return out[0], out[1], tuple(states)
    return out[0], out[1]


def _window_slice(times, n_periods, period):
    if len(times) < 2:
        raise WindowAlignmentError("need at least two samples")
    step = times[1] - times[0]
    if not np.allclose(np.diff(times), step, rtol=1e-9, atol=0):
        raise WindowAlignmentError("samples must be uniformly spaced")
    n = n_periods * period / step
    if abs(n - round(n)) > 1e-6 * max(1.0, n):
        raise WindowAlignmentError(
            f"{n_periods} beat periods span {n:.6f} samples, not an integer number"
        )
    n = int(round(n))
    if n + 1 > len(times):
        raise WindowAlignmentError(f"trace covers fewer than {n_periods} beat periods")
    return slice(len(times) - n - 1, len(times))


def _fourier(times, values, freq, span):
    return trapezoid(values * np.exp(1j * freq * times), times) / span


def demodulate(times, a_trace, omega_b, eps_p, kappa, window=5):
    """Split ``<a>(t)`` over its last ``window`` beat periods into DC and sideband parts.

    Integrals use the trapezoidal rule, which is exact for trigonometric
    polynomials on a uniform grid covering whole periods.
    """
    if eps_p == 0:
        raise ValueError("eps_p must be non-zero to normalize sidebands")
    if omega_b == 0:
        raise ResonanceDegeneracyError("beat frequency is zero")
    times = np.asarray(times, dtype=float)
    a_trace = np.asarray(a_trace, dtype=complex)
    period = 2 * np.pi / abs(omega_b)
    sl = _window_slice(times, int(window), period)
    t, y = times[sl], a_trace[sl]
    span = t[-1] - t[0]
    alpha = trapezoid(y, t) / span
    plus = _fourier(t, y, omega_b, span) / eps_p
    minus = _fourier(t, y, -omega_b, span) / eps_p
    h2 = (abs(_fourier(t, y, 2 * omega_b, span)) + abs(_fourier(t, y, -2 * omega_b, span))) / eps_p
    return SidebandDecomposition.from_amplitudes(alpha, plus, minus, kappa, h2)


def sidebands_time_domain(params, space, *, window=5, relax=None, dt=None, rho_start=None,
                          stationarity_tol=1e-4, max_doublings=3, control_envelope=None):
    """Evolve the two-tone driven system to stationarity and demodulate.

    The step is an integer fraction of the beat period so the demodulation
    windows align with the sample grid.  Evolution starts from the
    control-only steady state unless ``rho_start`` is given.
    """
    gen = build_generator(params, space, control_envelope=control_envelope)
    omega_b = params.beat_frequency
    period = 2 * np.pi / abs(omega_b)
    dt_max = default_step(gen) if dt is None else dt
    h = period / np.ceil(period / dt_max - 1e-9)
    if relax is None:
        # mechanical coherences decay at gamma_m / 2, hence 20 rather than 10 lifetimes
        relax = max(20 / params.gamma_m, 10 / params.kappa)
    relax = np.ceil(relax / period) * period
    if rho_start is None:
        rho_start = steady_state(gen.without_probe())
    span_windows = 2 * window * period
    rho, t = rho_start, 0.0
    duration = relax
    for attempt in range(max_doublings + 1):
        traj = evolve(gen, rho, (t, t + duration + span_windows), dt=h)
        rho, t = traj.final_state, t + duration + span_windows
        n_win = int(round(window * period / h))
        late = demodulate(traj.times, traj.a, omega_b, params.eps_p, params.kappa, window)
        early = demodulate(traj.times[:-n_win], traj.a[:-n_win], omega_b, params.eps_p,
                           params.kappa, window)
        scale = abs(late.delta_a_plus) + abs(late.delta_a_minus)
        drift = (abs(late.delta_a_plus - early.delta_a_plus)
                 + abs(late.delta_a_minus - early.delta_a_minus)) / max(scale, 1e-300)
        if drift < stationarity_tol:
            return late
        log.info("sidebands not stationary (drift %.2e); extending evolution", drift)
        duration = t
    raise StationarityError(f"sideband drift {drift:.2e} above {stationarity_tol:g} after {max_doublings} extensions")
