"""Liouville-space linear algebra for the static (probe-off) generator.

Vectorization is column stacking throughout: ``vec(X)[i + j*d] = X[i, j]``,
so ``vec(A X B) = kron(B.T, A) @ vec(X)``.

Two solver paths share one interface.  Superoperators up to
``DIRECT_LIMIT`` rows are factorized with sparse LU; larger ones use GMRES
on the matrix form of the generator, preconditioned by the exact inverse of
its no-jump part (a diagonal division in the eigenbasis of the effective
non-Hermitian Hamiltonian).  Sparse LU fill-in on these four-index lattices
grows too quickly to be useful past a joint dimension of about 60.
"""
from __future__ import annotations

import logging

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "DIRECT_LIMIT",
    "SolverError",
    "AmbiguousSteadyStateError",
    "vec",
    "unvec",
    "spre",
    "spost",
    "liouvillian",
    "LiouvilleSolver",
]

log = logging.getLogger(__name__)

DIRECT_LIMIT = 1024


class SolverError(RuntimeError):
    """A linear solve did not reach its residual target."""


class AmbiguousSteadyStateError(SolverError):
    """The generator has more than one stationary state at working precision."""


def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if d is None:
        d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ValueError(f"vector of length {v.size} is not a vectorized square matrix")
    return v.reshape(d, d, order="F")


def spre(a) -> sp.csr_matrix:
    """Superoperator of left multiplication, ``vec(A X)``."""
    return sp.kron(sp.identity(a.shape[0], dtype=complex), a, format="csr")


def spost(b) -> sp.csr_matrix:
    """Superoperator of right multiplication, ``vec(X B)``."""
    return sp.kron(sp.csr_matrix(b).T, sp.identity(b.shape[0], dtype=complex), format="csr")


def liouvillian(h, channels) -> sp.csr_matrix:
    """Sparse superoperator of ``-i[H, .] + sum rate * D[c]``."""
    h = sp.csr_matrix(h)
    out = -1j * (spre(h) - spost(h))
    for rate, c in channels:
        c = sp.csr_matrix(c)
        cdc = (c.conj().T @ c).tocsr()
        out = out + rate * (sp.kron(c.conj(), c, format="csr") - 0.5 * spre(cdc) - 0.5 * spost(cdc))
    return out.tocsr()


class LiouvilleSolver:
    """Linear solves with the probe-off generator ``L0``.

    Parameters
    ----------
    gen : LindbladGenerator
        Only its static Hamiltonian (control at full amplitude, probe off)
        and channels are used.
    method : {'auto', 'direct', 'iterative'}
    tol : float
        Target for the max-element residual of every solve.
    """

    def __init__(self, gen, method="auto", tol=1e-10, direct_limit=DIRECT_LIMIT):
        self.d = gen.space.dim
        self.h = gen.static_hamiltonian
        self.h_eff = gen.h_eff
        self.h_eff_dag = self.h_eff.conj().T.tocsr()
        self.channels = tuple((r, sp.csr_matrix(c)) for r, c in gen.channels)
        self._channels_dag = tuple((r, c, c.conj().T.tocsr()) for r, c in self.channels)
        self.tol = tol
        if method == "auto":
            method = "direct" if self.d ** 2 <= direct_limit else "iterative"
        if method not in ("direct", "iterative"):
            raise ValueError(f"unknown solver method {method!r}")
        self.method = method
        self._super = None
        self._eig = None
        rates = [r for r, _ in self.channels]
        self._reg = 0.5 * min(rates) if rates else 1e-6

    # -- operator application -------------------------------------------------
    def apply(self, x: np.ndarray, shift: complex = 0.0) -> np.ndarray:
        """``L0(X) + shift * X`` in matrix form, valid for any square ``X``."""
        y = self.h_eff @ x
        w = x @ self.h_eff_dag
        out = -1j * (y - w)
        for rate, c, cd in self._channels_dag:
            out += rate * ((c @ x) @ cd)
        if shift:
            out += shift * x
        return out

    @property
    def superoperator(self) -> sp.csc_matrix:
        if self._super is None:
            self._super = liouvillian(self.h, self.channels).tocsc()
        return self._super

    # -- preconditioner -------------------------------------------------------
    def _eigensystem(self):
        if self._eig is None:
            lam, v = la.eig(self.h_eff.toarray())
            self._eig = (lam, v, la.inv(v))
        return self._eig

    def _preconditioner(self, shift):
        lam, v, vi = self._eigensystem()
        denom = -1j * (lam[:, None] - lam.conj()[None, :]) + shift
        small = np.abs(denom) < self._reg
        denom = np.where(small, -self._reg, denom)
        vd = v.conj().T
        vid = vi.conj().T
        d = self.d

        def apply(x):
            xt = vi @ x.reshape(d, d) @ vid
            return (v @ (xt / denom) @ vd).ravel()

        return spla.LinearOperator((d * d, d * d), matvec=apply, dtype=complex)

    def _gmres(self, matvec, rhs, shift, x0=None):
        d = self.d
        op = spla.LinearOperator((d * d, d * d), matvec=lambda x: matvec(x.reshape(d, d)).ravel(),
                                 dtype=complex)
        pre = self._preconditioner(shift)
        b = rhs.ravel()
        x = None if x0 is None else x0.ravel()
        res = np.inf
        for _ in range(4):
            x, _ = spla.gmres(op, b, x0=x, M=pre, rtol=1e-13, atol=0.0, restart=120, maxiter=30)
            res = np.abs(op.matvec(x) - b).max()
            if res <= 0.1 * self.tol:
                break
        x = x.reshape(d, d)
        if res > self.tol:
            raise SolverError(f"GMRES residual {res:.2e} above target {self.tol:g} (shift={shift})")
        return x

    # -- public solves ----------------------------------------------------------
    def solve(self, rhs: np.ndarray, shift: complex = 0.0, x0=None) -> np.ndarray:
        """Solve ``(L0 + shift) X = rhs``.

        ``x0`` is an initial guess for the iterative path (ignored by the direct one).

        Raises
        ------
        SolverError
            If the shifted generator is singular or the residual target is missed.
        """
        rhs = np.asarray(rhs, dtype=complex)
        if self.method == "direct":
            mat = (self.superoperator + shift * sp.identity(self.d ** 2, format="csc")).tocsc()
            try:
                lu = spla.splu(mat)
            except RuntimeError as exc:
                raise SolverError(f"singular shifted generator (shift={shift})") from exc
            x = unvec(lu.solve(vec(rhs)), self.d)
            for _ in range(2):
                r = rhs - self.apply(x, shift)
                if np.abs(r).max() <= self.tol:
                    break
                x = x + unvec(lu.solve(vec(r)), self.d)
        else:
            x = self._gmres(lambda m: self.apply(m, shift), rhs, shift, x0=x0)
        res = np.abs(self.apply(x, shift) - rhs).max()
        if not np.all(np.isfinite(x)) or res > self.tol:
            raise SolverError(f"residual {res:.2e} above target {self.tol:g} (shift={shift})")
        return x

    def _steady_with_reference(self, ref_index):
        d = self.d
        if self.method == "direct":
            mat = self.superoperator.tolil()
            row = ref_index * (d + 1)
            mat[row, :] = 0.0
            mat[row, np.arange(d) * (d + 1)] = 1.0
            rhs = np.zeros(d * d, dtype=complex)
            rhs[row] = 1.0
            try:
                x = spla.splu(mat.tocsc()).solve(rhs)
            except RuntimeError as exc:
                raise AmbiguousSteadyStateError("generator null space is degenerate") from exc
            return unvec(x, d)
        ref = np.zeros((d, d), dtype=complex)
        ref[ref_index, ref_index] = 1.0
        return self._gmres(lambda m: self.apply(m) + ref * np.trace(m), ref, 0.0)

    def steady_state(self) -> np.ndarray:
        """Unique normalized null vector of ``L0``.

        Solved twice with different trace-anchoring references; disagreement
        signals a degenerate null space.
        """
        d = self.d
        try:
            first = self._steady_with_reference(0)
            second = self._steady_with_reference(d - 1)
        except SolverError as exc:
            if isinstance(exc, AmbiguousSteadyStateError):
                raise
            raise AmbiguousSteadyStateError(f"steady-state solve failed: {exc}") from exc
        states = []
        for rho in (first, second):
            if not np.all(np.isfinite(rho)):
                raise AmbiguousSteadyStateError("non-finite steady state")
            tr = np.trace(rho)
            if abs(tr) < 1e-12:
                raise AmbiguousSteadyStateError("steady-state candidate has vanishing trace")
            rho = rho / tr
            states.append(0.5 * (rho + rho.conj().T))
        if np.abs(states[0] - states[1]).max() > 1e-7:
            raise AmbiguousSteadyStateError("steady state depends on the normalization anchor")
        rho = states[0]
        res = np.abs(self.apply(rho)).max()
        if res > self.tol:
            # one step of refinement on the traceless correction
            corr = self.solve_traceless(-self.apply(rho))
            rho = rho + corr
            rho = 0.5 * (rho + rho.conj().T)
            rho /= np.trace(rho).real
            res = np.abs(self.apply(rho)).max()
            if res > self.tol:
                raise SolverError(f"steady-state residual {res:.2e} above {self.tol:g}")
        return rho

    def solve_traceless(self, rhs):
        """Traceless ``X`` with ``L0 X = rhs`` for a traceless ``rhs``."""
        d = self.d
        ref = np.eye(d, dtype=complex) / d
        return self._gmres(lambda m: self.apply(m) + ref * np.trace(m), rhs, 0.0) \
            if self.method == "iterative" else self._direct_traceless(rhs)

    def _direct_traceless(self, rhs):
        d = self.d
        mat = self.superoperator.tolil()
        mat[0, :] = 0.0
        mat[0, np.arange(d) * (d + 1)] = 1.0
        b = vec(rhs).copy()
        b[0] = 0.0
        return unvec(spla.splu(mat.tocsc()).solve(b), d)
