"""Dense complex linear algebra used throughout the simulator.

All functions take and return plain ``numpy`` arrays. Superoperators act on
row-major vectorized density matrices, i.e. ``vec(rho) = rho.reshape(-1)``,
for which ``vec(A @ rho @ B) = kron(A, B.T) @ vec(rho)``.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

# Pade [6/6] coefficients b_k = (12-k)! 6! / (12! k! (6-k)!)
_PADE6 = (1.0, 1.0 / 2, 5.0 / 44, 1.0 / 66, 1.0 / 792, 1.0 / 15840, 1.0 / 665280)
_EXPM_THETA = 0.5
_PSD_REJECT = 1e-6


def kron(a, b):
    """Kronecker product; ``(A kron B)[p*i + k, q*j + l] = A[i, j] B[k, l]``."""
    return np.kron(np.asarray(a), np.asarray(b))


def dagger(m):
    return np.conj(np.swapaxes(m, -1, -2))


def is_hermitian(m, rtol=1e-12):
    m = np.asarray(m)
    scale = np.max(np.abs(m)) if m.size else 0.0
    if scale == 0.0:
        return True
    return bool(np.max(np.abs(m - dagger(m))) < rtol * scale)


def expm(m):
    """Matrix exponential by scaling and squaring around a [6/6] Pade core.

    The matrix is scaled by ``2**-s`` until its 1-norm is at most 0.5, where the
    truncation error of the diagonal Pade approximant is below 1e-16.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {m.shape}")
    n = m.shape[0]
    dtype = np.result_type(m.dtype, np.float64)
    norm = np.max(np.sum(np.abs(m), axis=0)) if n else 0.0
    if not np.isfinite(norm):
        raise ValueError("expm input has non-finite entries")
    s = 0
    if norm > _EXPM_THETA:
        s = int(np.ceil(np.log2(norm / _EXPM_THETA)))
    a = m.astype(dtype) / (2.0**s)

    ident = np.eye(n, dtype=dtype)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    b = _PADE6
    u = a @ (b[1] * ident + b[3] * a2 + b[5] * a4)
    v = b[0] * ident + b[2] * a2 + b[4] * a4 + b[6] * a6
    r = scipy.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


def eigh_psd(m):
    """Eigen-decomposition of a Hermitian matrix with tiny negative eigenvalues clamped.

    Raises ``ValueError("not PSD")`` when an eigenvalue is below -1e-6 relative
    to the largest one.
    """
    m = np.asarray(m)
    h = 0.5 * (m + dagger(m))
    w, v = np.linalg.eigh(h)
    scale = max(np.max(np.abs(w)) if w.size else 0.0, 1.0)
    if w.size and w[0] < -_PSD_REJECT * scale:
        raise ValueError(f"not PSD: eigenvalue {w[0]:.3e}")
    return np.clip(w, 0.0, None), v


def sqrtm_psd(m):
    """Hermitian PSD square root via eigen-decomposition."""
    w, v = eigh_psd(m)
    return (v * np.sqrt(w)) @ dagger(v)


def singular_values(a):
    """Singular values from the Hermitian eigenproblem of ``A^dagger A``."""
    a = np.asarray(a)
    w = np.linalg.eigvalsh(dagger(a) @ a)
    return np.sqrt(np.clip(w, 0.0, None))


def trace_norm_half(a):
    """Half the trace norm, ``0.5 * Tr sqrt(A^dagger A)``.

    Hermitian input uses ``sum |eigenvalues|``, which avoids square roots of
    round-off eigenvalues of ``A^dagger A``.
    """
    a = np.asarray(a)
    if is_hermitian(a):
        return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (a + dagger(a))))))
    return 0.5 * float(np.sum(singular_values(a)))


def project_computational(rho_full, basis_map):
    """Cut the 4x4 computational block out of a two-atom density matrix.

    Returns ``(rho4, trace_loss)`` with ``trace_loss = 1 - Tr rho4``; the block
    is not renormalized.
    """
    rho_full = np.asarray(rho_full)
    idx = np.asarray(basis_map, dtype=int)
    n = rho_full.shape[0]
    if idx.shape != (4,) or np.any(idx < 0) or np.any(idx >= n):
        raise IndexError(f"basis_map {list(basis_map)} out of range for dimension {n}")
    rho4 = rho_full[np.ix_(idx, idx)].copy()
    loss = 1.0 - float(np.real(np.trace(rho4)))
    return rho4, loss


def vec(rho):
    return np.asarray(rho).reshape(-1)


def unvec(v, dim=None):
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    return v.reshape(dim, dim)


def commutator_superop(h):
    """Superoperator of ``rho -> -i [H, rho]`` for row-major vectorization."""
    h = np.asarray(h)
    ident = np.eye(h.shape[0])
    return -1j * (np.kron(h, ident) - np.kron(ident, h.T))


def sandwich_superop(a, b):
    """Superoperator of ``rho -> A rho B``."""
    return np.kron(a, np.asarray(b).T)
