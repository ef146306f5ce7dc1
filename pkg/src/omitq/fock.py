"""Truncated bosonic Fock-space algebra for one photon and one phonon mode.

Joint operators are ordered photon-first: a photon operator ``A`` acts as
``kron(A, I_phonon)`` and a phonon operator ``B`` as ``kron(I_photon, B)``.
The joint basis index of ``|n_a, n_b>`` is therefore ``n_a * N_b + n_b``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

__all__ = [
    "InvalidDimensionError",
    "ModeSpace",
    "ladder_operator",
    "number_operator",
    "tensor_embed",
    "expectation",
    "displacement_operator",
    "fock_density",
    "thermal_state",
    "check_density_matrix",
]


class InvalidDimensionError(ValueError):
    """Raised when an operator or state does not fit the declared space."""


@dataclass(frozen=True)
class ModeSpace:
    """Truncation of the photon and phonon ladders.

    Parameters
    ----------
    n_photon_levels : int
        Number of photon Fock states kept (``0 .. N_a - 1``).
    n_phonon_levels : int
        Number of phonon Fock states kept (``0 .. N_b - 1``).
    """

    n_photon_levels: int
    n_phonon_levels: int

    def __post_init__(self):
        for name in ("n_photon_levels", "n_phonon_levels"):
            value = getattr(self, name)
            if int(value) != value or value < 2:
                raise InvalidDimensionError(f"{name} must be an integer >= 2, got {value!r}")

    @property
    def dim(self) -> int:
        return self.n_photon_levels * self.n_phonon_levels

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_photon_levels, self.n_phonon_levels)

    def index(self, n_a: int, n_b: int) -> int:
        """Joint basis index of ``|n_a, n_b>``."""
        if not (0 <= n_a < self.n_photon_levels and 0 <= n_b < self.n_phonon_levels):
            raise InvalidDimensionError(f"state |{n_a},{n_b}> outside space {self.shape}")
        return n_a * self.n_phonon_levels + n_b

    def __str__(self):
        return f"{self.n_photon_levels}x{self.n_phonon_levels}"


def _check_dim(dim):
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"ladder dimension must be an integer >= 2, got {dim!r}")
    return int(dim)


def ladder_operator(dim: int) -> np.ndarray:
    """Annihilation operator on ``dim`` Fock levels, ``<n-1|a|n> = sqrt(n)``."""
    dim = _check_dim(dim)
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def number_operator(dim: int) -> np.ndarray:
    dim = _check_dim(dim)
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def tensor_embed(op: np.ndarray, space: ModeSpace, which_mode: str) -> np.ndarray:
    """Lift a single-mode operator onto the joint photon-phonon space.

    Parameters
    ----------
    op : ndarray
        Square operator on the photon or phonon ladder.
    space : ModeSpace
    which_mode : {'photon', 'phonon'}

    Returns
    -------
    ndarray
        ``kron(op, I)`` for the photon mode, ``kron(I, op)`` for the phonon mode.
    """
    op = np.asarray(op)
    if which_mode == "photon":
        size, other = space.n_photon_levels, space.n_phonon_levels
    elif which_mode == "phonon":
        size, other = space.n_phonon_levels, space.n_photon_levels
    else:
        raise ValueError(f"which_mode must be 'photon' or 'phonon', got {which_mode!r}")
    if op.shape != (size, size):
        raise InvalidDimensionError(
            f"{which_mode} operator has shape {op.shape}, space expects ({size}, {size})"
        )
    eye = np.eye(other, dtype=complex)
    if which_mode == "photon":
        return np.kron(op, eye)
    return np.kron(eye, op)


def expectation(op, rho: np.ndarray) -> complex:
    """``Tr(op @ rho)`` without forming the product."""
    rho = np.asarray(rho)
    if op.shape != rho.shape:
        raise InvalidDimensionError(f"operator shape {op.shape} does not match state {rho.shape}")
    if hasattr(op, "multiply"):
        return complex(op.multiply(rho.T).sum())
    return complex(np.einsum("ij,ji->", op, rho))


def displacement_operator(dim: int, beta: complex) -> np.ndarray:
    """``exp(beta b^dag - conj(beta) b)`` on the truncated ladder.

    The exponent is built on the truncated space, so the result is exactly
    unitary; matrix elements agree with the infinite-dimensional operator
    only in the block well below the cutoff.
    """
    b = ladder_operator(dim)
    return la.expm(beta * b.conj().T - np.conj(beta) * b)


def fock_density(space: ModeSpace, n_a: int, n_b: int) -> np.ndarray:
    """Pure Fock state ``|n_a, n_b><n_a, n_b|``."""
    rho = np.zeros((space.dim, space.dim), dtype=complex)
    k = space.index(n_a, n_b)
    rho[k, k] = 1.0
    return rho


def thermal_state(dim: int, n_th: float) -> np.ndarray:
    """Thermal (geometric) populations with mean ``n_th`` renormalised on the truncation."""
    dim = _check_dim(dim)
    if n_th < 0:
        raise ValueError("n_th must be >= 0")
    if n_th == 0:
        p = np.zeros(dim)
        p[0] = 1.0
    else:
        p = (n_th / (1.0 + n_th)) ** np.arange(dim)
        p /= p.sum()
    return np.diag(p).astype(complex)


def check_density_matrix(rho, *, herm_tol=1e-10, trace_tol=1e-9, eig_tol=1e-8):
    """Validate a density matrix, returning ``(trace, hermiticity defect, min eigenvalue)``.

    Raises
    ------
    ValueError
        If any of the three invariants is violated.
    """
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidDimensionError(f"density matrix must be square, got {rho.shape}")
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    tr = complex(np.trace(rho))
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    if herm > herm_tol:
        raise ValueError(f"hermiticity defect {herm:.3e} exceeds {herm_tol:g}")
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"trace {tr} deviates from 1 by more than {trace_tol:g}")
    if min_eig < -eig_tol:
        raise ValueError(f"smallest eigenvalue {min_eig:.3e} below {-eig_tol:g}")
    return tr.real, herm, min_eig
