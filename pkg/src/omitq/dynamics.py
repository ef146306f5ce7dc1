"""Time-domain integration of the optomechanical master equation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fock import ModeSpace, displacement_operator, InvalidDimensionError
from ._kernels import Rk4Stepper, diagonal_rates
from .liouville import liouvillian, unvec, vec

__all__ = [
    "DriveSchedule",
    "IntegrationError",
    "StateTrajectory",
    "apply_generator",
    "default_step",
    "evolve",
    "populations_polaron",
    "polaron_projector",
    "transistor_schedule",
]


class IntegrationError(RuntimeError):
    """Trace drift or a non-finite state during time stepping."""


@dataclass(frozen=True)
class DriveSchedule:
    """Piecewise-linear envelope, constant beyond the first and last knot.

    With ``mode='power'`` the knots describe the drive power and the returned
    amplitude multiplier is its square root.
    """

    knots: tuple
    mode: str = "amplitude"

    def __post_init__(self):
        knots = tuple((float(t), float(m)) for t, m in self.knots)
        if not knots:
            raise ValueError("a schedule needs at least one knot")
        times = np.array([t for t, _ in knots])
        if np.any(np.diff(times) <= 0):
            raise ValueError("knot times must be strictly increasing")
        if any(not 0.0 <= m <= 1.0 for _, m in knots):
            raise ValueError("envelope multipliers must lie in [0, 1]")
        if self.mode not in ("amplitude", "power"):
            raise ValueError(f"mode must be 'amplitude' or 'power', got {self.mode!r}")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "_t", times)
        object.__setattr__(self, "_m", np.array([m for _, m in knots]))

    @classmethod
    def constant(cls, value: float = 1.0) -> "DriveSchedule":
        return cls(((0.0, value),))

    def __call__(self, t):
        v = np.interp(t, self._t, self._m)
        return np.sqrt(v) if self.mode == "power" else v


def transistor_schedule(t_switch=100.0, t_hold=1.0e4, mode="power") -> DriveSchedule:
    """Control envelope: ramp 0 -> 1 over ``t_switch``, hold, ramp back to 0."""
    return DriveSchedule(
        ((0.0, 0.0), (t_switch, 1.0), (t_switch + t_hold, 1.0), (2 * t_switch + t_hold, 0.0)),
        mode=mode,
    )


@dataclass
class StateTrajectory:
    """Recorded observables on the sample grid; ``snapshots`` maps time -> density matrix."""

    times: np.ndarray
    a: np.ndarray
    n_photon: np.ndarray
    n_phonon: np.ndarray
    trace: np.ndarray
    observables: dict = field(default_factory=dict)
    snapshots: dict = field(default_factory=dict)
    final_state: np.ndarray | None = None


def _coeffs(gen, t):
    """Coefficients ``u, v`` of ``a^dag`` and ``a`` in the drive Hamiltonian at time ``t``."""
    c = gen.control_multiplier(t) * gen.params.eps_c
    p = gen.probe_multiplier(t) * gen.params.eps_p
    phase = np.exp(-1j * gen.omega_b * t)
    return c + p * phase, c + p * np.conj(phase)


def apply_generator(gen, rho: np.ndarray, t: float = 0.0) -> np.ndarray:
    """``d rho / dt`` of the master equation at time ``t``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (gen.space.dim, gen.space.dim):
        raise InvalidDimensionError(f"state shape {rho.shape} does not match space {gen.space}")
    h = gen.hamiltonian(t)
    out = -1j * (h @ rho - (h.T @ rho.T).T)
    for rate, c in gen.channels:
        cd = c.conj().T
        cdc = cd @ c
        out += rate * ((cd.T @ (c @ rho).T).T - 0.5 * (cdc @ rho) - 0.5 * (cdc.T @ rho.T).T)
    return np.asarray(out)


def _no_jump_hamiltonian(gen):
    """Static part of ``H - (i/2) sum_c r_c c^dag c`` as CSR."""
    decay = sum((r * (c.conj().T @ c) for r, c in gen.channels),
                sp.csr_matrix(gen.h_bare.shape, dtype=complex))
    return (gen.h_bare - 0.5j * decay).tocsr()


def _drive(gen, t):
    """Coefficient ``u`` of ``a^dag`` in the drive Hamiltonian ``u a^dag + conj(u) a``."""
    return _coeffs(gen, t)[0]


def _frequency_span(gen) -> float:
    """Upper bound on the generator's spectral radius, from the static spectrum."""
    h = gen.h_bare.toarray()
    e = np.linalg.eigvalsh(0.5 * (h + h.conj().T))
    drive = 2 * (gen.params.eps_c + gen.params.eps_p) * np.sqrt(gen.space.n_photon_levels)
    decay = sum(r * abs(c.conj().T @ c).sum(axis=0).max() for r, c in gen.channels)
    return float(e.max() - e.min() + 2 * drive + 2 * decay)


STEPS_PER_PERIOD = 100


def default_step(gen) -> float:
    """``2 pi / (100 omega)``, shortened if needed to keep RK4 stable (``dt * span < 2.5``).

    At 50 steps per period the fixed point of the discrete map is biased by
    ``~h^4 / gamma_m``, enough for a halved step to move the phonon number
    by ~1e-5 relative; 100 steps keeps that below 1e-7.
    """
    return min(2 * np.pi / (STEPS_PER_PERIOD * gen.params.omega), 2.5 / _frequency_span(gen))


def _observable_terms(op):
    coo = sp.coo_matrix(op)
    return coo.data, coo.col, coo.row


def _measure(terms, x):
    data, row_idx, col_idx = terms
    return complex(np.dot(data, x[row_idx, col_idx]))


def _rk4_propagator(gen, dt, n):
    """Dense ``n``-step map of the integrating-factor RK4 used by :class:`Rk4Stepper`."""
    k0 = _no_jump_hamiltonian(gen)
    diag = vec(diagonal_rates(k0))
    full = liouvillian(gen.static_hamiltonian, gen.channels).toarray()
    coupling = full - np.diag(diag)
    p1 = np.diag(np.exp(0.5 * dt * diag))
    p2 = np.diag(np.exp(dt * diag))
    eye = np.eye(len(diag), dtype=complex)
    k1 = coupling
    k2 = coupling @ p1 @ (eye + 0.5 * dt * k1)
    k3 = coupling @ (p1 + 0.5 * dt * k2)
    k4 = coupling @ (p2 + dt * p1 @ k3)
    step = p2 + (dt / 6) * (p2 @ k1 + 2 * p1 @ (k2 + k3) + k4)
    return np.linalg.matrix_power(step, n)


def evolve(gen, rho0, t_span, *, dt=None, sample_every=1, observables=None,
           snapshot_times=(), trace_tol=1e-7) -> StateTrajectory:
    """Integrate the master equation with fixed-step fourth-order Runge-Kutta.

    The free rotation of each Fock-basis coherence is taken into an
    integrating factor, so the step only has to resolve decay, couplings
    and drives.

    Parameters
    ----------
    gen : LindbladGenerator
    rho0 : ndarray
        Initial density matrix.
    t_span : (float, float)
        Start and end time.  The step is shrunk so an integer number of
        steps covers the span exactly.
    dt : float, optional
        Maximum step; defaults to :func:`default_step`.
    sample_every : int
        Record observables every this many steps (the start is always recorded).
    observables : dict[str, matrix], optional
        Extra operators whose expectation values are recorded.
    snapshot_times : iterable of float
        Times at which the full density matrix is stored (nearest step).
    trace_tol : float
        Maximum allowed trace drift before :class:`IntegrationError` is raised.
    """
    t0, t1 = map(float, t_span)
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    d = gen.space.dim
    x = np.array(rho0, dtype=complex)
    if x.shape != (d, d):
        raise InvalidDimensionError(f"initial state shape {x.shape} does not match space {gen.space}")
    dt_max = default_step(gen) if dt is None else float(dt)
    n_steps = max(1, int(np.ceil((t1 - t0) / dt_max - 1e-9)))
    h = (t1 - t0) / n_steps
    sample_every = max(1, int(sample_every))

    terms = {"a": _observable_terms(gen.a),
             "n_photon": _observable_terms(gen.a.conj().T @ gen.a),
             "n_phonon": _observable_terms(gen.b.conj().T @ gen.b)}
    extra = {k: _observable_terms(v) for k, v in (observables or {}).items()}
    snap_steps = {int(round((ts - t0) / h)): ts for ts in snapshot_times}

    n_samples = n_steps // sample_every + 1
    times = t0 + h * sample_every * np.arange(n_samples)
    rec = {k: np.empty(n_samples, dtype=complex) for k in list(terms) + ["trace"]}
    rec_extra = {k: np.empty(n_samples, dtype=complex) for k in extra}
    snapshots = {}

    def record(i, state):
        for k, tm in terms.items():
            rec[k][i] = _measure(tm, state)
        for k, tm in extra.items():
            rec_extra[k][i] = _measure(tm, state)
        tr = np.trace(state)
        rec["trace"][i] = tr
        if not np.isfinite(tr) or abs(tr - 1.0) > trace_tol:
            raise IntegrationError(
                f"trace drifted to {tr:.12g} at t={times[i]:.6g}; reduce the time step (dt={h:.4g})"
            )

    def snap(step, state):
        if step in snap_steps:
            snapshots[snap_steps[step]] = state.copy()

    record(0, x)
    snap(0, x)
    if gen.is_time_independent and d * d <= 256:
        prop = _rk4_propagator(gen, h, sample_every)
        v = vec(x)
        single = None
        for i in range(1, n_samples):
            v = prop @ v
            x = unvec(v, d)
            record(i, x)
            snap(i * sample_every, x)
        rest = n_steps - (n_samples - 1) * sample_every
        if rest:
            single = _rk4_propagator(gen, h, 1)
            for k in range(rest):
                v = single @ v
                snap((n_samples - 1) * sample_every + k + 1, unvec(v, d))
            x = unvec(v, d)
    else:
        # Stages stay exactly Hermitian, so only -i(Y - Y^dag) with Y = H_eff X is formed.
        stepper = Rk4Stepper(_no_jump_hamiltonian(gen), gen.a, gen.channels)
        x = 0.5 * (x + x.conj().T)
        driven = gen.params.eps_c > 0 or gen.has_probe
        u_next = _drive(gen, t0) if driven else 0.0
        for step in range(1, n_steps + 1):
            t = t0 + (step - 1) * h
            u1 = u_next
            if driven:
                u_mid = _drive(gen, t + h / 2)
                u_next = _drive(gen, t0 + step * h)
            else:
                u_mid = 0.0
            stepper.step(x, h, u1, u_mid, u_next)
            if step % sample_every == 0:
                record(step // sample_every, x)
            snap(step, x)
    return StateTrajectory(
        times=times,
        a=rec["a"],
        n_photon=rec["n_photon"].real,
        n_phonon=rec["n_phonon"].real,
        trace=rec["trace"].real,
        observables=rec_extra,
        snapshots=snapshots,
        final_state=x,
    )


def _polaron_frames(params, space):
    lam = params.lamb_dicke
    return [displacement_operator(space.n_phonon_levels, n_a * lam)
            for n_a in range(space.n_photon_levels)]


def populations_polaron(rho, params, space: ModeSpace) -> np.ndarray:
    """Occupations ``p[n_a, n_b]`` of the undriven eigenstates ``|n_a> (x) D(n_a g0/omega)|n_b>``."""
    rho = np.asarray(rho)
    if rho.shape != (space.dim, space.dim):
        raise InvalidDimensionError(f"state shape {rho.shape} does not match space {space}")
    nb = space.n_phonon_levels
    out = np.empty(space.shape)
    for n_a, u in enumerate(_polaron_frames(params, space)):
        block = rho[n_a * nb:(n_a + 1) * nb, n_a * nb:(n_a + 1) * nb]
        out[n_a] = np.real(np.einsum("ji,jk,ki->i", u.conj(), block, u))
    return out


def polaron_projector(params, space: ModeSpace, n_a: int, n_b: int) -> np.ndarray:
    """Joint-space projector onto the polaron eigenstate ``|n_a, n_b>``."""
    nb = space.n_phonon_levels
    u = displacement_operator(nb, n_a * params.lamb_dicke)
    psi = np.zeros(space.dim, dtype=complex)
    psi[n_a * nb:(n_a + 1) * nb] = u[:, n_b]
    return np.outer(psi, psi.conj())
