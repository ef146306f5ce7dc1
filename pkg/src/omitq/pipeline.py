"""Experiment orchestration: probe spectra, OMIT signals, sweeps and the transistor protocol."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.integrate import cumulative_trapezoid

from .dynamics import DriveSchedule, IntegrationError, default_step, evolve, polaron_projector, transistor_schedule
from .fock import ModeSpace
from .liouville import LiouvilleSolver, SolverError
from .model import (DegenerateBeatError, SystemParams, build_generator, classical_transmission,
                    modified_classical_transmission, transmission_from_coupling)
from .response import (HARMONIC_FLAG_RATIO, StationarityError, normalized_transmission,
                       sidebands_linear_response, sidebands_time_domain, steady_state)

__all__ = [
    "CrossoverResult",
    "InsufficientResolutionError",
    "ResourceLimitError",
    "SpectrumResult",
    "TemperatureSweepResult",
    "TransistorResult",
    "convergence_guard",
    "crossover_sweep",
    "fano_amplitude",
    "main_dip_grid",
    "omit_signal",
    "probe_spectrum",
    "sideband_grid",
    "temperature_sweep",
    "transistor_run",
]

log = logging.getLogger(__name__)

METHODS = ("linear-response", "time-domain")
DEFAULT_START = (4, 12)
DEFAULT_CEILING = 4096
# Warm-started solves are chained inside fixed blocks of the grid, so results
# do not depend on how blocks are spread over workers.
BLOCK = 16
REFERENCE_PHOTON_LEVELS = 4
FIG4_COUPLING = 1.25e-3


class InsufficientResolutionError(ValueError):
    """Too few grid points inside the requested window."""


class ResourceLimitError(RuntimeError):
    """Truncation would exceed the configured joint-dimension ceiling."""


# ---------------------------------------------------------------------------
# grids


def sideband_grid(n: int, gamma_m: float, half_width: float = 20.0, step: float = 0.2) -> np.ndarray:
    """``n*Omega +/- half_width*gamma_m`` sampled every ``step*gamma_m`` (endpoints included)."""
    count = int(round(2 * half_width / step)) + 1
    return n + gamma_m * np.linspace(-half_width, half_width, count)


def main_dip_grid(params: SystemParams, points: int = 201) -> np.ndarray:
    """Window around the red-sideband OMIT dip at ``delta_p = delta_c + Omega``.

    The half-width is ``20 gamma_m``, widened to ``5 (gamma_m + gamma_opt)`` when
    optical damping dominates.
    """
    from .model import optical_damping

    g_opt = optical_damping(params)
    half = 20 * params.gamma_m
    if g_opt > params.gamma_m:
        half = max(half, 5 * (params.gamma_m + g_opt))
    return params.delta_c + params.omega + np.linspace(-half, half, points)


# ---------------------------------------------------------------------------
# truncation control


def _relative_change(new, old) -> float:
    new, old = np.atleast_1d(new), np.atleast_1d(old)
    scale = max(np.abs(old).max(), np.finfo(float).tiny)
    return float(np.abs(new - old).max() / scale)


def thermal_phonon_floor(n_th: float, tol: float, start: int = DEFAULT_START[1], step: int = 4) -> int:
    """Smallest ``start + k*step`` with thermal tail ``(n/(1+n))**N < tol``."""
    if n_th <= 0:
        return start
    ratio = n_th / (1 + n_th)
    need = int(np.floor(np.log(tol) / np.log(ratio))) + 1
    return start + step * max(0, -(-(need - start) // step))


@dataclass
class GuardRecord:
    space: ModeSpace
    trials: list = field(default_factory=list)  # (ModeSpace, relative change, adopted)


def convergence_guard(params: SystemParams, evaluator, tol: float = 1e-4, *, start=DEFAULT_START,
                      ceiling: int = DEFAULT_CEILING, first: str = "photon", record: GuardRecord | None = None
                      ) -> ModeSpace:
    """Grow the truncation until ``evaluator(params, space)`` is stable to ``tol``.

    Growth alternates between the modes (photon +2, phonon +4).  A step whose
    change is below ``tol`` is not adopted and marks that mode converged; an
    adopted step clears the other mode's mark.  The loop ends once both
    modes are marked.  The phonon start is raised to cover the thermal tail
    ``(n_th/(1+n_th))**N_b < tol``.

    Raises
    ------
    ResourceLimitError
        If a candidate space exceeds ``ceiling`` joint levels.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if first not in ("photon", "phonon"):
        raise ValueError("first must be 'photon' or 'phonon'")
    na, nb = start
    nb = max(nb, thermal_phonon_floor(params.n_th, tol, start=nb))
    space = ModeSpace(na, nb)
    if space.dim > ceiling:
        raise ResourceLimitError(f"initial space {space} exceeds the ceiling of {ceiling} joint levels")
    current = evaluator(params, space)
    converged = {"photon": False, "phonon": False}
    mode = first
    while not all(converged.values()):
        other = "phonon" if mode == "photon" else "photon"
        if converged[mode]:
            mode = other
            continue
        cand = ModeSpace(space.n_photon_levels + 2, space.n_phonon_levels) if mode == "photon" \
            else ModeSpace(space.n_photon_levels, space.n_phonon_levels + 4)
        if cand.dim > ceiling:
            raise ResourceLimitError(
                f"truncation not converged at {space}; next size {cand} exceeds {ceiling} joint levels")
        value = evaluator(params, cand)
        change = _relative_change(value, current)
        adopted = change >= tol
        log.debug("guard %s -> %s: change %.3e", space, cand, change)
        if record is not None:
            record.trials.append((cand, change, adopted))
        if adopted:
            space, current = cand, value
            converged[other] = False
        else:
            converged[mode] = True
        mode = other
    if record is not None:
        record.space = space
    return space


def _transmission_probe_points(grid):
    grid = np.asarray(grid, dtype=float)
    return np.array([grid[0], grid[len(grid) // 2], grid[-1]])


def _lr_evaluator(points):
    def evaluate(params, space):
        gen = build_generator(params.replace(eps_p=0.0), space)
        solver = LiouvilleSolver(gen)
        rho = steady_state(gen, solver=solver)
        out = []
        for dp in points:
            plus, minus = sidebands_linear_response(gen, rho, dp - params.delta_c, solver)
            out.append(normalized_transmission(plus, minus, params.kappa))
        return np.array(out)

    return evaluate


# ---------------------------------------------------------------------------
# spectra


@dataclass
class SpectrumResult:
    """Probe spectrum on a detuning grid together with the linearized references."""

    delta_p: np.ndarray
    transmission: np.ndarray
    classical: np.ndarray
    modified_classical: np.ndarray
    harmonic2: np.ndarray
    params: SystemParams
    space: ModeSpace
    method: str
    photon_number: float
    signal: np.ndarray | None = None
    reference_space: ModeSpace | None = None
    started: float = 0.0
    finished: float = 0.0
    first_harmonic: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.delta_p)
        for name in ("transmission", "classical", "modified_classical", "harmonic2"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} does not match the grid length {n}")

    @property
    def harmonic_flags(self) -> np.ndarray:
        """Points whose second-harmonic diagnostic exceeds the flag ratio."""
        if self.first_harmonic is None:
            return np.zeros(len(self.delta_p), dtype=bool)
        return self.harmonic2 > HARMONIC_FLAG_RATIO * self.first_harmonic


def _check_grid(params, grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ValueError("grid must be a non-empty 1-D sequence of detunings")
    if np.any(grid == params.delta_c):
        raise DegenerateBeatError("grid contains delta_p = delta_c (zero beat frequency)")
    return grid


def _annotate(exc, dp):
    """Re-raise ``exc`` with the failing detuning in its message."""
    try:
        new = type(exc)(f"at delta_p = {dp:.12g}: {exc}")
    except Exception:  # exotic constructor signature
        return exc
    new.delta_p = dp
    return new


def _lr_block(params, space, rho_ss, block, solver=None):
    gen = build_generator(params.replace(eps_p=0.0), space)
    if solver is None:
        solver = LiouvilleSolver(gen)
    out, guess = [], None
    for dp in block:
        try:
            plus, minus, guess = sidebands_linear_response(gen, rho_ss, dp - params.delta_c, solver,
                                                           guess=guess, return_states=True)
        except SolverError as exc:
            raise _annotate(exc, dp) from exc
        out.append((plus, minus))
    return out


def _td_point(params, space, dp, rho_ss, td_options):
    try:
        return sidebands_time_domain(params.replace(delta_p=float(dp)), space, rho_start=rho_ss, **td_options)
    except (SolverError, IntegrationError, StationarityError) as exc:
        raise _annotate(exc, dp) from exc


def _default_eps_p(params):
    return params.eps_p if params.eps_p > 0 else (params.eps_c / 10 if params.eps_c > 0 else 1e-3)


def probe_spectrum(params: SystemParams, grid, method: str = "linear-response", *, space: ModeSpace | None = None,
                   tol: float = 1e-4, ceiling: int = DEFAULT_CEILING, n_jobs: int = 1,
                   td_options: dict | None = None, guard_record: GuardRecord | None = None) -> SpectrumResult:
    """Normalized probe transmission across ``grid`` with classical references.

    Parameters
    ----------
    params : SystemParams
        ``delta_p`` is ignored (taken from the grid).  For the time-domain
        method a zero ``eps_p`` is replaced by ``eps_c / 10``.
    grid : array_like
        Probe detunings; must not contain ``delta_c``.
    method : {'linear-response', 'time-domain'}
    space : ModeSpace, optional
        Skip the convergence guard and use this truncation.
    tol, ceiling
        Convergence-guard tolerance and joint-dimension ceiling.  The guard
        evaluates linear-response transmissions at the grid ends and centre.
    n_jobs : int
        Worker processes for independent grid blocks (joblib).
    td_options : dict, optional
        Extra keyword arguments for :func:`sidebands_time_domain`.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    grid = _check_grid(params, grid)
    started = time.time()
    if space is None:
        space = convergence_guard(params, _lr_evaluator(_transmission_probe_points(grid)), tol,
                                  ceiling=ceiling, record=guard_record)
    elif space.dim > ceiling:
        raise ResourceLimitError(f"space {space} exceeds the ceiling of {ceiling} joint levels")
    gen = build_generator(params.replace(eps_p=0.0), space)
    solver = LiouvilleSolver(gen)
    rho_ss = steady_state(gen, solver=solver)
    photons = float(np.real(np.trace((gen.a.conj().T @ gen.a) @ rho_ss)))

    if method == "linear-response":
        blocks = [grid[i:i + BLOCK] for i in range(0, len(grid), BLOCK)]
        if n_jobs == 1:
            parts = [_lr_block(params, space, rho_ss, b, solver) for b in blocks]
        else:
            parts = Parallel(n_jobs=n_jobs)(delayed(_lr_block)(params, space, rho_ss, b) for b in blocks)
        amps = [pm for part in parts for pm in part]
        plus = np.array([p for p, _ in amps])
        minus = np.array([m for _, m in amps])
        h2 = np.zeros(len(grid))
        run_params = params
    else:
        run_params = params.replace(eps_p=_default_eps_p(params))
        opts = dict(td_options or {})
        if n_jobs == 1:
            decs = [_td_point(run_params, space, dp, rho_ss, opts) for dp in grid]
        else:
            decs = Parallel(n_jobs=n_jobs)(delayed(_td_point)(run_params, space, dp, rho_ss, opts) for dp in grid)
        plus = np.array([d.delta_a_plus for d in decs])
        minus = np.array([d.delta_a_minus for d in decs])
        h2 = np.array([d.harmonic_2_magnitude for d in decs])
    trans = normalized_transmission(plus, minus, params.kappa)
    result = SpectrumResult(
        delta_p=grid,
        transmission=np.asarray(trans, dtype=float),
        classical=np.asarray(classical_transmission(params, grid), dtype=float),
        modified_classical=np.asarray(modified_classical_transmission(params, grid, photons), dtype=float),
        harmonic2=h2,
        params=run_params.replace(delta_p=0.0) if method == "time-domain" else params,
        space=space,
        method=method,
        photon_number=photons,
        started=started,
        finished=time.time(),
        first_harmonic=np.abs(plus) + np.abs(minus),
    )
    if result.harmonic_flags.any():
        log.warning("second harmonic above %.0f%% of the first at %d grid points",
                    100 * HARMONIC_FLAG_RATIO, int(result.harmonic_flags.sum()))
    return result


def omit_signal(params: SystemParams, grid, method: str = "linear-response", *, space: ModeSpace | None = None,
                tol: float = 1e-4, ceiling: int = DEFAULT_CEILING, n_jobs: int = 1,
                td_options: dict | None = None, guard_record: GuardRecord | None = None) -> SpectrumResult:
    """Probe spectrum with the control-on minus control-off difference in ``signal``.

    The control-off reference keeps every parameter except ``eps_c = 0``.
    Without control the cavity holds at most the probe's few photons, so the
    reference runs with ``min(N_a, 4)`` photon levels and the same phonon
    truncation.  With ``eps_c == 0`` the two runs coincide and the signal is
    identically zero.
    """
    on = probe_spectrum(params, grid, method, space=space, tol=tol, ceiling=ceiling, n_jobs=n_jobs,
                        td_options=td_options, guard_record=guard_record)
    if params.eps_c == 0:
        on.signal = on.transmission - on.transmission
        on.reference_space = on.space
        return on
    ref_space = ModeSpace(min(on.space.n_photon_levels, REFERENCE_PHOTON_LEVELS), on.space.n_phonon_levels)
    off_params = params.replace(eps_c=0.0)
    if method == "time-domain":
        off_params = off_params.replace(eps_p=_default_eps_p(params))
    off = probe_spectrum(off_params, grid, method, space=ref_space, ceiling=ceiling, n_jobs=n_jobs,
                         td_options=td_options)
    on.signal = on.transmission - off.transmission
    on.reference_space = ref_space
    on.finished = time.time()
    return on


def fano_amplitude(spectrum: SpectrumResult, window=None, min_points: int = 20) -> float:
    """``max(signal) - min(signal)`` over the detuning ``window`` (default: whole grid)."""
    if spectrum.signal is None:
        raise ValueError("spectrum carries no OMIT signal; use omit_signal")
    x = np.asarray(spectrum.delta_p)
    mask = np.ones(len(x), dtype=bool) if window is None else (x >= window[0]) & (x <= window[1])
    if window is not None and (window[0] < x.min() or window[1] > x.max()):
        raise ValueError(f"window {tuple(window)} is not inside the grid [{x.min():g}, {x.max():g}]")
    if mask.sum() < min_points:
        raise InsufficientResolutionError(
            f"only {int(mask.sum())} grid points in the window; at least {min_points} are needed")
    s = np.asarray(spectrum.signal)[mask]
    return float(s.max() - s.min())


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class CrossoverResult:
    """Spectra at fixed ``g0 * eps_c`` for several ``g0 / kappa``."""

    entries: list  # (ratio, SpectrumResult)
    reference: np.ndarray
    coupling: float
    sideband: int

    def amplitudes(self, window=None) -> list:
        return [fano_amplitude(s, window) for _, s in self.entries]

    def classical_deviation(self) -> list:
        """Largest relative deviation of the quantum transmission from the classical reference."""
        return [float(np.max(np.abs(s.transmission - self.reference) / self.reference)) for _, s in self.entries]


def crossover_sweep(base: SystemParams, ratios=(1.0, 0.5, 0.25, 0.1), sideband: int = 2, *, grid=None,
                    method: str = "linear-response", tol: float = 1e-4, ceiling: int = DEFAULT_CEILING,
                    n_jobs: int = 1, td_options=None, records: dict | None = None) -> CrossoverResult:
    """OMIT spectra near ``sideband * Omega`` while trading ``g0`` against ``eps_c``.

    ``base.g0 * base.eps_c`` is held fixed; each ratio sets ``g0 = ratio * kappa``
    and ``eps_c = coupling / g0``.  The classical curve depends on that product
    only, so it is evaluated once and shared by every entry.
    """
    ratios = [float(r) for r in ratios]
    if any(r <= 0 for r in ratios):
        raise ValueError("ratios must be positive")
    if sideband not in (1, 2):
        raise ValueError("sideband must be 1 or 2")
    coupling = base.g0 * base.eps_c
    if grid is None:
        grid = base.delta_c + sideband_grid(sideband, base.gamma_m)
    grid = _check_grid(base, grid)
    alpha_scale = abs(1j / (1j * base.delta_c - base.kappa / 2)) ** 2
    reference = np.asarray(transmission_from_coupling(grid, base, coupling ** 2 * alpha_scale), dtype=float)
    entries = []
    for r in ratios:
        g0 = r * base.kappa
        params = base.replace(g0=g0, eps_c=coupling / g0)
        rec = GuardRecord(space=None)
        try:
            spec = omit_signal(params, grid, method, tol=tol, ceiling=ceiling, n_jobs=n_jobs,
                               td_options=td_options, guard_record=rec)
        except ResourceLimitError as exc:
            raise ResourceLimitError(f"g0/kappa = {r:g}: {exc}") from exc
        spec.classical = reference.copy()
        if records is not None:
            records[r] = rec
        entries.append((r, spec))
    return CrossoverResult(entries=entries, reference=reference, coupling=coupling, sideband=sideband)


@dataclass
class TemperatureSweepResult:
    entries: list  # (n_th, SpectrumResult)
    window: tuple

    @property
    def amplitudes(self) -> list:
        return [fano_amplitude(s, self.window) for _, s in self.entries]


def temperature_sweep(base: SystemParams, n_th_values=(0.0, 0.5, 1.0, 2.0), ratio: float = 0.5, sideband: int = 2,
                      *, grid=None, method: str = "linear-response", tol: float = 1e-4,
                      ceiling: int = DEFAULT_CEILING, n_jobs: int = 1, td_options=None) -> TemperatureSweepResult:
    """Second-sideband OMIT spectra at several bath occupations for one ``g0 / kappa``."""
    coupling = base.g0 * base.eps_c
    g0 = ratio * base.kappa
    params = base.replace(g0=g0, eps_c=coupling / g0)
    if grid is None:
        grid = params.delta_c + sideband_grid(sideband, params.gamma_m)
    grid = _check_grid(params, grid)
    entries = [(float(n), omit_signal(params.replace(n_th=float(n)), grid, method, tol=tol, ceiling=ceiling,
                                      n_jobs=n_jobs, td_options=td_options))
               for n in n_th_values]
    return TemperatureSweepResult(entries=entries, window=(float(grid[0]), float(grid[-1])))


# ---------------------------------------------------------------------------
# transistor protocol


@dataclass
class ExponentialFit:
    tau: float
    t_start: float
    t_stop: float
    baseline: float
    points: int


@dataclass
class TransistorResult:
    """Time-resolved probe transmission through a control-laser switching cycle."""

    times: np.ndarray
    transmission: np.ndarray
    population_times: np.ndarray
    populations: dict  # (n_a, n_b) -> array
    control: np.ndarray
    params: SystemParams
    space: ModeSpace
    schedule: DriveSchedule
    switch_on: ExponentialFit | None = None
    switch_off: ExponentialFit | None = None
    p10_frequency: float | None = None
    fit_errors: list = field(default_factory=list)


class FitError(RuntimeError):
    """Exponential fit could not be performed on the transient."""


def sliding_transmission(times, a_trace, omega_b, eps_p, kappa):
    """One-beat-period sliding demodulation of ``<a>(t)``.

    Returns window-centre times and ``|delta_a|**2`` normalized like the
    stationary transmission.
    """
    times = np.asarray(times, dtype=float)
    step = times[1] - times[0]
    m = 2 * np.pi / abs(omega_b) / step
    if abs(m - round(m)) > 1e-6 * m:
        raise ValueError("the sample step must divide the beat period")
    m = int(round(m))
    period = m * step
    ph = np.exp(1j * omega_b * times)
    cp = cumulative_trapezoid(a_trace * ph, times, initial=0.0)
    cm = cumulative_trapezoid(a_trace * ph.conj(), times, initial=0.0)
    plus = (cp[m:] - cp[:-m]) / (period * eps_p)
    minus = (cm[m:] - cm[:-m]) / (period * eps_p)
    return times[m:] - period / 2, normalized_transmission(plus, minus, kappa)


def fit_exponential(t, y, baseline) -> ExponentialFit:
    """Log-linear least-squares time constant of ``|y - baseline|``.

    Uses the stretch between the first drops of the deviation below 90% and
    below 10% of its initial value.
    """
    t, y = np.asarray(t, dtype=float), np.asarray(y, dtype=float)
    dev = np.abs(y - baseline)
    if len(dev) < 3 or dev[0] <= 0:
        raise FitError("transient is empty")
    upper, lower = 0.9 * dev[0], 0.1 * dev[0]
    below_upper = np.nonzero(dev <= upper)[0]
    below_lower = np.nonzero(dev <= lower)[0]
    if len(below_upper) == 0 or len(below_lower) == 0:
        raise FitError("transient does not decay through the 90%-10% range")
    i0, i1 = below_upper[0], below_lower[0]
    if i1 - i0 < 3:
        raise FitError("too few samples between 90% and 10% of the transient")
    sel = slice(i0, i1 + 1)
    slope, _ = np.polyfit(t[sel], np.log(np.maximum(dev[sel], np.finfo(float).tiny)), 1)
    if slope >= 0:
        raise FitError("fitted deviation does not decay")
    return ExponentialFit(tau=float(-1 / slope), t_start=float(t[i0]), t_stop=float(t[i1]),
                          baseline=float(baseline), points=int(i1 - i0 + 1))


def dominant_frequency(t, y) -> float:
    """Angular frequency of the largest peak in the Hann-windowed spectrum of ``y``."""
    t, y = np.asarray(t, dtype=float), np.asarray(y, dtype=float)
    step = t[1] - t[0]
    y = (y - y.mean()) * np.hanning(len(y))
    spec = np.abs(np.fft.rfft(y))
    freqs = 2 * np.pi * np.fft.rfftfreq(len(y), step)
    k = int(np.argmax(spec[1:]) + 1)
    if 1 <= k < len(spec) - 1:
        # parabolic interpolation on the log magnitude
        a, b, c = np.log(spec[k - 1:k + 2] + 1e-300)
        denom = a - 2 * b + c
        shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
        return float(freqs[k] + shift * (freqs[1] - freqs[0]))
    return float(freqs[k])


TRANSISTOR_POPULATIONS = ((0, 0), (0, 1), (1, 0), (1, 1), (2, 0))


def transistor_run(params: SystemParams, schedule: DriveSchedule | None = None, *, space: ModeSpace | None = None,
                   settle: float | None = None, tail: float | None = None, dt: float | None = None,
                   population_states=TRANSISTOR_POPULATIONS, population_every: int = 5, tol: float = 1e-4,
                   ceiling: int = DEFAULT_CEILING) -> TransistorResult:
    """Switch the control laser on and off under a weak probe and follow the transmission.

    The system first settles for ``settle`` (default ``20/kappa``) with the
    probe alone, then the control follows ``schedule`` (default: power ramp
    over 100, hold 1e4, ramp down over 100), and the run continues for
    ``tail`` (default ``20/kappa``) after the last knot.  ``eps_p`` defaults to
    ``eps_c / 100``.

    The time-resolved transmission comes from a sliding one-beat-period
    demodulation.  Switch-on and switch-off time constants are fitted on the
    hold and tail segments; a failed fit is listed in ``fit_errors`` while
    the series are still returned.
    """
    if schedule is None:
        schedule = transistor_schedule()
    if params.eps_p == 0:
        params = params.replace(eps_p=params.eps_c / 100)
    if params.eps_c <= 0:
        raise ValueError("the transistor protocol needs a control drive (eps_c > 0)")
    if params.beat_frequency == 0:
        raise DegenerateBeatError("probe and control coincide (zero beat frequency)")
    settle = 20 / params.kappa if settle is None else float(settle)
    tail = 20 / params.kappa if tail is None else float(tail)
    if space is None:
        space = convergence_guard(params, _lr_evaluator([params.delta_p]), tol, ceiling=ceiling)
    knots = schedule.knots
    t_first, t_last = knots[0][0], knots[-1][0]
    shifted = DriveSchedule(tuple((t + settle - t_first, m) for t, m in knots), mode=schedule.mode)
    gen = build_generator(params, space, control_envelope=shifted)
    period = 2 * np.pi / abs(params.beat_frequency)
    dt_max = default_step(gen) if dt is None else dt
    h = period / np.ceil(period / dt_max - 1e-9)
    t_end = settle + (t_last - t_first) + tail
    t_end = np.ceil(t_end / h) * h

    # undriven start: vacuum cavity, thermal mechanics
    from .fock import thermal_state

    rho0 = np.kron(np.diag([1.0] + [0.0] * (space.n_photon_levels - 1)),
                   thermal_state(space.n_phonon_levels, params.n_th))
    projectors = {s: polaron_projector(params, space, *s) for s in population_states}
    traj = evolve(gen, rho0, (0.0, t_end), dt=h, observables=projectors)
    t_mid, trans = sliding_transmission(traj.times, traj.a, params.beat_frequency, params.eps_p, params.kappa)
    sel = slice(None, None, max(1, int(population_every)))
    pops = {s: np.real(v[sel]) for s, v in traj.observables.items()}
    result = TransistorResult(
        times=t_mid,
        transmission=np.asarray(trans, dtype=float),
        population_times=traj.times[sel],
        populations=pops,
        control=np.asarray(shifted(t_mid), dtype=float),
        params=params,
        space=space,
        schedule=shifted,
    )

    on_knots = [t for t, m in shifted.knots if m == 1.0]
    if len(on_knots) >= 2:
        t_on, t_hold_end = on_knots[0], on_knots[-1]
    else:
        t_on, t_hold_end = shifted.knots[0][0], shifted.knots[-1][0]
    t_off = shifted.knots[-1][0]
    half = period / 2

    hold = (t_mid >= t_on + half) & (t_mid <= t_hold_end - half)
    after = t_mid >= t_off + half
    try:
        seg_t, seg_y = t_mid[hold], result.transmission[hold]
        base = float(np.mean(seg_y[-max(1, len(seg_y) // 20):]))
        result.switch_on = fit_exponential(seg_t, seg_y, base)
    except (FitError, ValueError) as exc:
        result.fit_errors.append(f"switch-on: {exc}")
    try:
        seg_t, seg_y = t_mid[after], result.transmission[after]
        base = float(np.mean(seg_y[-max(1, len(seg_y) // 20):]))
        result.switch_off = fit_exponential(seg_t, seg_y, base)
    except (FitError, ValueError) as exc:
        result.fit_errors.append(f"switch-off: {exc}")
    if (1, 0) in pops:
        pt = result.population_times
        in_hold = (pt >= t_on) & (pt <= t_hold_end)
        if in_hold.sum() > 8:
            result.p10_frequency = dominant_frequency(pt[in_hold], pops[(1, 0)][in_hold])
        else:
            result.fit_errors.append("p10 spectrum: hold phase too short")
    return result
