"""Optomechanical model: parameters, rotating-frame generator and the
linearized (classical) transmission formulas.

All frequencies and rates are in units of the mechanical frequency, which is
fixed to ``omega = 1``.  Detunings ``delta_c`` and ``delta_p`` are measured
from the effective cavity resonance ``w_cav - g0**2 / omega``; the shift to
the bare-frame photon coefficient happens only in :func:`build_generator`.
"""
from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.special import eval_genlaguerre, gammaln

from .fock import ModeSpace, displacement_operator, ladder_operator

__all__ = [
    "SystemParams",
    "LindbladGenerator",
    "DegenerateBeatError",
    "build_generator",
    "eigenenergy",
    "franck_condon",
    "franck_condon_numeric",
    "classical_alpha",
    "optical_damping",
    "susceptibility",
    "classical_transmission",
    "modified_classical_transmission",
    "transmission_from_coupling",
]


class DegenerateBeatError(ValueError):
    """Probe and control share a frequency, so no sideband decomposition exists."""


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters in units of the mechanical frequency.

    ``kappa_out`` defaults to ``kappa``; it never enters the normalized
    transmission and is carried only for completeness.
    """

    kappa: float
    gamma_m: float
    g0: float
    eps_c: float = 0.0
    eps_p: float = 0.0
    delta_c: float = 0.0
    delta_p: float = 0.0
    n_th: float = 0.0
    kappa_out: Optional[float] = None
    omega: float = 1.0

    def __post_init__(self):
        if self.kappa_out is None:
            object.__setattr__(self, "kappa_out", self.kappa)
        for name in ("kappa", "gamma_m", "g0", "eps_c", "eps_p", "delta_c", "delta_p",
                     "n_th", "kappa_out", "omega"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.omega != 1.0:
            raise ValueError("frequencies are in units of the mechanical frequency; omega must be 1")
        for name in ("kappa", "gamma_m"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)!r}")
        for name in ("g0", "n_th", "eps_c", "eps_p"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        if not 0 < self.kappa_out <= self.kappa:
            raise ValueError("kappa_out must satisfy 0 < kappa_out <= kappa")
        if self.g0 > 0.5 * self.omega:
            raise ValueError(f"g0 = {self.g0} violates g0 << omega (limit 0.5)")
        if self.g0 > 0.2 * self.omega:
            warnings.warn(f"g0 = {self.g0} is not small compared to omega", stacklevel=3)

    @property
    def beat_frequency(self) -> float:
        """Probe minus control frequency, ``delta_p - delta_c``."""
        return self.delta_p - self.delta_c

    @property
    def lamb_dicke(self) -> float:
        """Single-photon displacement ``g0 / omega`` of the polaron transformation."""
        return self.g0 / self.omega

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class LindbladGenerator:
    """Master-equation generator in the frame rotating at the control frequency.

    The Hamiltonian at time ``t`` is::

        h_bare + c(t) * h_control
               + p(t) * (exp(-1j*w_b*t) * probe_plus + exp(1j*w_b*t) * probe_minus)

    with ``c``, ``p`` the control and probe envelopes (``None`` means a
    constant multiplier of one).  Operators are sparse CSR matrices.
    """

    params: SystemParams
    space: ModeSpace
    h_bare: sp.csr_matrix
    h_control: sp.csr_matrix
    probe_plus: sp.csr_matrix
    probe_minus: sp.csr_matrix
    omega_b: float
    channels: tuple
    a: sp.csr_matrix
    b: sp.csr_matrix
    control_envelope: Optional[Callable[[float], float]] = None
    probe_envelope: Optional[Callable[[float], float]] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def has_probe(self) -> bool:
        return self.params.eps_p > 0

    @property
    def is_time_independent(self) -> bool:
        return not self.has_probe and self.control_envelope is None

    @property
    def static_hamiltonian(self) -> sp.csr_matrix:
        """Probe-off Hamiltonian with the control at full amplitude."""
        if "h_static" not in self._cache:
            self._cache["h_static"] = (self.h_bare + self.h_control).tocsr()
        return self._cache["h_static"]

    @property
    def h_eff(self) -> sp.csr_matrix:
        """Non-Hermitian ``static_hamiltonian - i/2 sum rate c^dag c``."""
        if "h_eff" not in self._cache:
            decay = sum((rate * (c.conj().T @ c) for rate, c in self.channels),
                        sp.csr_matrix(self.h_bare.shape, dtype=complex))
            self._cache["h_eff"] = (self.static_hamiltonian - 0.5j * decay).tocsr()
        return self._cache["h_eff"]

    def control_multiplier(self, t: float) -> float:
        return 1.0 if self.control_envelope is None else float(self.control_envelope(t))

    def probe_multiplier(self, t: float) -> float:
        if not self.has_probe:
            return 0.0
        return 1.0 if self.probe_envelope is None else float(self.probe_envelope(t))

    def hamiltonian(self, t: float) -> sp.csr_matrix:
        h = self.h_bare + self.control_multiplier(t) * self.h_control
        p = self.probe_multiplier(t)
        if p:
            phase = np.exp(-1j * self.omega_b * t)
            h = h + p * (phase * self.probe_plus + np.conj(phase) * self.probe_minus)
        return h.tocsr()

    def without_probe(self) -> "LindbladGenerator":
        params = self.params.replace(eps_p=0.0)
        zero = sp.csr_matrix(self.h_bare.shape, dtype=complex)
        return dataclasses.replace(self, params=params, probe_plus=zero, probe_minus=zero,
                                   probe_envelope=None, _cache={})


def build_generator(params: SystemParams, space: ModeSpace, control_envelope=None,
                    probe_envelope=None) -> LindbladGenerator:
    """Assemble the rotating-frame Hamiltonian pieces and dissipation channels.

    Raises
    ------
    DegenerateBeatError
        If a probe is present and ``delta_p == delta_c``.
    """
    if params.eps_p > 0 and params.beat_frequency == 0:
        raise DegenerateBeatError("probe and control detunings coincide (zero beat frequency)")
    na, nb = space.shape
    a1 = sp.csr_matrix(ladder_operator(na))
    b1 = sp.csr_matrix(ladder_operator(nb))
    a = sp.kron(a1, sp.identity(nb), format="csr")
    b = sp.kron(sp.identity(na), b1, format="csr")
    ad, bd = a.conj().T.tocsr(), b.conj().T.tocsr()
    n_a = (ad @ a).tocsr()
    g0, om = params.g0, params.omega
    photon_coeff = -(params.delta_c - g0 ** 2 / om)
    h_bare = (photon_coeff * n_a + om * (bd @ b) - g0 * ((bd + b) @ n_a)).tocsr()
    h_control = (params.eps_c * (ad + a)).tocsr()
    channels = [
        (params.kappa, a),
        (params.gamma_m * (params.n_th + 1.0), b),
        (params.gamma_m * params.n_th, bd),
    ]
    channels = tuple((float(r), c) for r, c in channels if r > 0)
    return LindbladGenerator(
        params=params,
        space=space,
        h_bare=h_bare,
        h_control=h_control,
        probe_plus=(params.eps_p * ad).tocsr(),
        probe_minus=(params.eps_p * a).tocsr(),
        omega_b=params.beat_frequency,
        channels=channels,
        a=a,
        b=b,
        control_envelope=control_envelope,
        probe_envelope=probe_envelope,
    )


def eigenenergy(n_a: int, n_b: int, params: SystemParams, omega_ref: float = 0.0) -> float:
    """Undriven polaron eigenenergy ``E(n_a, n_b)``.

    The absolute effective cavity frequency never enters the simulation, so
    it is supplied as ``omega_ref`` (default 0, giving the offset only).
    """
    if n_a < 0 or n_b < 0:
        raise ValueError("quantum numbers must be non-negative")
    g0, om = params.g0, params.omega
    return n_a * omega_ref + om * n_b - g0 ** 2 * n_a * (n_a - 1) / om


def franck_condon(m: int, n: int, lam: float) -> float:
    """``|<m|D(lam)|n>|**2`` for a real displacement, via associated Laguerre polynomials."""
    if m < 0 or n < 0:
        raise ValueError("Fock indices must be non-negative")
    lo, hi = min(m, n), max(m, n)
    x = float(lam) ** 2
    if x == 0.0:
        return 1.0 if m == n else 0.0
    log_pref = gammaln(lo + 1) - gammaln(hi + 1) + (hi - lo) * np.log(x) - x
    return float(np.exp(log_pref) * eval_genlaguerre(lo, hi - lo, x) ** 2)


def franck_condon_numeric(m: int, n: int, lam: float, dim: int = 60) -> float:
    """Brute-force Franck-Condon factor from a truncated displacement operator."""
    if max(m, n) >= dim:
        raise ValueError("dim must exceed both Fock indices")
    return float(abs(displacement_operator(dim, lam)[m, n]) ** 2)


def classical_alpha(params: SystemParams) -> complex:
    """Linearized intracavity amplitude ``i eps_c / (i delta_c - kappa/2)``."""
    return 1j * params.eps_c / (1j * params.delta_c - params.kappa / 2)


def optical_damping(params: SystemParams) -> float:
    """``4 g0**2 |alpha|**2 / kappa``."""
    return 4 * params.g0 ** 2 * abs(classical_alpha(params)) ** 2 / params.kappa


def susceptibility(w, params: SystemParams):
    """Rescaled mechanical susceptibility ``1 / (1 - (w/W)^2 - i w G / W^2)``."""
    om = params.omega
    return 1.0 / (1.0 - (np.asarray(w) / om) ** 2 - 1j * np.asarray(w) * params.gamma_m / om ** 2)


def transmission_from_coupling(delta_p, params: SystemParams, coupling_sq: float,
                               numerator: float = 1.0):
    """Linearized transmission for a given ``g0**2 * n_photons``.

    Only the product ``coupling_sq`` enters, which is what keeps the
    classical curve fixed along a constant ``g0 |alpha|`` sweep.
    """
    delta_p = np.asarray(delta_p, dtype=float)
    k = params.kappa
    chi = susceptibility(delta_p - params.delta_c, params)
    denom = -1j * delta_p + k / 2 - 2j * (coupling_sq / params.omega) * chi
    out = numerator * (k ** 2 / 4) * np.abs(1.0 / denom) ** 2
    return float(out) if out.ndim == 0 else out


def classical_transmission(params: SystemParams, delta_p=None):
    """Normalized probe transmission of the linearized theory.

    ``delta_p`` defaults to ``params.delta_p``; arrays are evaluated pointwise.
    """
    if delta_p is None:
        delta_p = params.delta_p
    return transmission_from_coupling(delta_p, params, params.g0 ** 2 * abs(classical_alpha(params)) ** 2)


def modified_classical_transmission(params: SystemParams, delta_p, photon_number: float):
    """Linearized transmission with the 0-0 Franck-Condon factor in the numerator
    and the quantum photon number in place of ``|alpha|**2``.

    The single ``exp(-(g0/omega)**2)`` factor is applied at every detuning.
    """
    if photon_number < 0:
        raise ValueError("photon_number must be >= 0")
    fc = np.exp(-params.lamb_dicke ** 2)
    return transmission_from_coupling(delta_p, params, params.g0 ** 2 * photon_number, numerator=fc)
