"""Compiled inner loops for fixed-step RK4 on Hermitian density matrices.

The real diagonal of the no-jump Hamiltonian (the bare rotation of each
Fock-basis coherence) is integrated exactly through elementwise phase
factors; RK4 sees the couplings, drives and dissipation.  Leaving the decay
out of the factors keeps every stage traceless, so the trace is conserved
to roundoff as with plain RK4.  Falls back to scipy
sparse products when numba is unavailable.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None


def _csr_accumulate(indptr, indices, data, coef, x, out):
    """``out += coef * (A @ x)`` for CSR ``A`` and dense ``x``."""
    ncol = x.shape[1]
    for i in range(indptr.shape[0] - 1):
        for p in range(indptr[i], indptr[i + 1]):
            v = coef * data[p]
            k = indices[p]
            for j in range(ncol):
                out[i, j] += v * x[k, j]


def _rhs(x, u, k0p, k0i, k0d, ap, ai, ad, bp, bi, bd, jp, ji, jd, rates, y, z, out):
    """``out = -i(Y - Y^dag) + sum_c rate_c c x c^dag`` with ``Y = (K0 + u a^dag + conj(u) a) x``.

    ``a^dag`` is passed as CSR (``b*``); the jump operators are stacked
    CSR blocks ``jp[c]`` / ``ji[c]`` / ``jd[c]`` padded to a common length.
    """
    n = x.shape[0]
    y[:, :] = 0.0
    _csr_accumulate(k0p, k0i, k0d, 1.0 + 0.0j, x, y)
    if u != 0:
        _csr_accumulate(bp, bi, bd, u, x, y)
        _csr_accumulate(ap, ai, ad, np.conj(u), x, y)
    for i in range(n):
        for j in range(n):
            out[i, j] = -1j * (y[i, j] - np.conj(y[j, i]))
    for c in range(rates.shape[0]):
        rate = rates[c]
        z[:, :] = 0.0
        _csr_accumulate(jp[c], ji[c], jd[c], 1.0 + 0.0j, x, z)
        for j in range(n):
            for p in range(jp[c, j], jp[c, j + 1]):
                v = rate * np.conj(jd[c, p])
                k = ji[c, p]
                for i in range(n):
                    out[i, j] += v * z[i, k]
    # The shortcut is only valid on Hermitian input, and its action on an
    # anti-Hermitian remainder is not contractive, so strip roundoff here.
    for i in range(n):
        out[i, i] = out[i, i].real
        for j in range(i + 1, n):
            m = 0.5 * (out[i, j] + np.conj(out[j, i]))
            out[i, j] = m
            out[j, i] = np.conj(m)


def _rk4_step(x, h, u1, u2, u4, p1, p2, k0p, k0i, k0d, ap, ai, ad, bp, bi, bd, jp, ji, jd, rates,
              y, z, k, acc, stage):
    """Integrating-factor RK4; ``p1``/``p2`` are the diagonal propagators over ``h/2`` and ``h``."""
    n = x.shape[0]
    _rhs(x, u1, k0p, k0i, k0d, ap, ai, ad, bp, bi, bd, jp, ji, jd, rates, y, z, k)
    for i in range(n):
        for j in range(n):
            acc[i, j] = p2[i, j] * k[i, j]
            stage[i, j] = p1[i, j] * (x[i, j] + 0.5 * h * k[i, j])
    _rhs(stage, u2, k0p, k0i, k0d, ap, ai, ad, bp, bi, bd, jp, ji, jd, rates, y, z, k)
    for i in range(n):
        for j in range(n):
            acc[i, j] += 2.0 * p1[i, j] * k[i, j]
            stage[i, j] = p1[i, j] * x[i, j] + 0.5 * h * k[i, j]
    _rhs(stage, u2, k0p, k0i, k0d, ap, ai, ad, bp, bi, bd, jp, ji, jd, rates, y, z, k)
    for i in range(n):
        for j in range(n):
            acc[i, j] += 2.0 * p1[i, j] * k[i, j]
            stage[i, j] = p2[i, j] * x[i, j] + h * p1[i, j] * k[i, j]
    _rhs(stage, u4, k0p, k0i, k0d, ap, ai, ad, bp, bi, bd, jp, ji, jd, rates, y, z, k)
    for i in range(n):
        for j in range(n):
            x[i, j] = p2[i, j] * x[i, j] + (h / 6.0) * (acc[i, j] + k[i, j])


if njit is not None:
    _csr_accumulate = njit(cache=True)(_csr_accumulate)
    _rhs = njit(cache=True)(_rhs)
    _rk4_step = njit(cache=True)(_rk4_step)
    HAVE_NUMBA = True
else:  # pragma: no cover
    HAVE_NUMBA = False


def _csr_parts(m):
    m = sp.csr_matrix(m, dtype=complex)
    m.sort_indices()
    return m.indptr.astype(np.int64), m.indices.astype(np.int64), m.data.astype(complex)


def diagonal_rates(k0) -> np.ndarray:
    """``D[i, j] = -i (e_i - e_j)`` with ``e`` the real part of the diagonal of ``K0``."""
    e = np.real(sp.csr_matrix(k0).diagonal())
    return -1j * (e[:, None] - e[None, :])


def rotation_removed(k0):
    k0 = sp.csr_matrix(k0, dtype=complex)
    return (k0 - sp.diags(np.real(k0.diagonal()))).tocsr()


class Rk4Stepper:
    """In-place RK4 steps of ``d rho/dt`` for Hermitian ``rho``.

    The Hamiltonian part is ``K0 + u(t) a^dag + conj(u(t)) a`` where ``K0``
    already carries the anti-Hermitian decay term and ``u`` is supplied by
    the caller at each stage time.  The real diagonal of ``K0`` is split
    off and propagated exactly.
    """

    def __init__(self, k0, a, channels):
        self.rates_diag = diagonal_rates(k0)
        self._factor_step = None
        k0 = rotation_removed(k0)
        self.k0 = _csr_parts(k0)
        self.a = _csr_parts(a)
        self.ad = _csr_parts(sp.csr_matrix(a).conj().T)
        n = k0.shape[0]
        chans = [(float(r), sp.csr_matrix(c, dtype=complex)) for r, c in channels]
        width = max([c.nnz for _, c in chans] + [1])
        nc = len(chans)
        self.jp = np.zeros((nc, n + 1), dtype=np.int64)
        self.ji = np.zeros((nc, width), dtype=np.int64)
        self.jd = np.zeros((nc, width), dtype=complex)
        self.rates = np.array([r for r, _ in chans], dtype=float)
        for c, (_, m) in enumerate(chans):
            p, i, d = _csr_parts(m)
            self.jp[c] = p
            self.ji[c, :len(i)] = i
            self.jd[c, :len(d)] = d
        self._scratch = [np.zeros((n, n), dtype=complex) for _ in range(5)]
        self._ops = (sp.csr_matrix(k0), sp.csr_matrix(a), sp.csr_matrix(a).conj().T.tocsr(), chans)

    def _factors(self, h):
        if self._factor_step != h:
            self._p = (np.exp(0.5 * h * self.rates_diag), np.exp(h * self.rates_diag))
            self._factor_step = h
        return self._p

    def rhs(self, x, u=0.0):
        """Full ``d rho/dt`` including the diagonal part."""
        return self._coupling(x, u) + self.rates_diag * x

    def _coupling(self, x, u=0.0):
        out = np.empty_like(x)
        y, z = self._scratch[0], self._scratch[1]
        if HAVE_NUMBA:
            _rhs(x, complex(u), *self.k0, *self.a, *self.ad, self.jp, self.ji, self.jd,
                 self.rates, y, z, out)
            return out
        k0, a, ad, chans = self._ops  # pragma: no cover
        yy = k0 @ x + u * (ad @ x) + np.conj(u) * (a @ x)
        out = -1j * (yy - yy.conj().T)
        for r, c in chans:
            out += r * (c @ (c @ x).conj().T).conj().T
        return 0.5 * (out + out.conj().T)

    def step(self, x, h, u1, u2, u4):
        """Advance ``x`` in place by ``h``; ``u1, u2, u4`` are drive coefficients at ``t, t+h/2, t+h``."""
        p1, p2 = self._factors(h)
        if HAVE_NUMBA:
            y, z, k, acc, stage = self._scratch
            _rk4_step(x, h, complex(u1), complex(u2), complex(u4), p1, p2, *self.k0, *self.a, *self.ad,
                      self.jp, self.ji, self.jd, self.rates, y, z, k, acc, stage)
            return x
        n = self._coupling  # pragma: no cover
        k1 = n(x, u1)
        k2 = n(p1 * (x + 0.5 * h * k1), u2)
        k3 = n(p1 * x + 0.5 * h * k2, u2)
        k4 = n(p2 * x + h * p1 * k3, u4)
        x[:] = p2 * x + (h / 6) * (p2 * k1 + 2 * p1 * (k2 + k3) + k4)
        return x
