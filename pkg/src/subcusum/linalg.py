"""Small dense symmetric linear algebra.

The eigensolver is a cyclic Jacobi method.  Rotations are applied in
round-robin (Brent-Luk) order so that every round touches disjoint index
pairs and can be applied to the whole matrix at once with numpy.
"""

from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, EmptyComplement, InvalidInput

SYMMETRY_RTOL = 1e-12
JACOBI_TOL = 1e-12
MAX_SWEEPS = 100


class SpectralDecomposition(NamedTuple):
    eigenvalues: np.ndarray   # descending
    eigenvectors: np.ndarray  # column j pairs with eigenvalues[j]


def as_symmetric(A) -> np.ndarray:
    """Validate and return ``A`` as a float symmetric matrix."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise InvalidInput(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput("matrix has non-finite entries")
    scale = max(1.0, float(np.abs(A).max()))
    if np.abs(A - A.T).max() > SYMMETRY_RTOL * scale:
        raise InvalidInput("matrix is not symmetric")
    return A


def as_basis(U, name="basis") -> np.ndarray:
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    if U.ndim != 2 or U.shape[1] > U.shape[0]:
        raise InvalidInput(f"{name} must be k x d with d <= k, got shape {U.shape}")
    if not np.all(np.isfinite(U)):
        raise InvalidInput(f"{name} has non-finite entries")
    if U.shape[1] and np.linalg.norm(U.T @ U - np.eye(U.shape[1])) > 1e-8:
        raise InvalidInput(f"{name} columns are not orthonormal")
    return U


@lru_cache(maxsize=64)
def _round_robin(k):
    """Disjoint (p, q) index pairs for each round of one Jacobi sweep."""
    n = k + (k % 2)
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        pairs = [(players[i], players[n - 1 - i]) for i in range(n // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if max(a, b) < k]
        if pairs:
            p, q = np.array(pairs).T
            rounds.append((p, q))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def _off_norm(A):
    off = A - np.diag(np.diag(A))
    return float(np.linalg.norm(off))


def _jacobi(A, V, tol=JACOBI_TOL, max_sweeps=MAX_SWEEPS):
    k = A.shape[0]
    scale = np.linalg.norm(A)
    if k == 1 or scale == 0.0:
        return A, V
    rounds = _round_robin(k)
    for _ in range(max_sweeps):
        if _off_norm(A) <= tol * scale:
            return A, V
        for p, q in rounds:
            apq = A[p, q]
            active = apq != 0.0
            if not active.any():
                continue
            safe = np.where(active, apq, 1.0)
            theta = (A[q, q] - A[p, p]) / (2.0 * safe)
            big = np.abs(theta) > 1e150
            theta_sq = np.where(big, 0.0, theta) ** 2
            t = np.where(
                big,
                0.5 / np.where(big, theta, 1.0),
                np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta_sq + 1.0)),
            )
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            Ap, Aq = A[:, p], A[:, q]
            A[:, p] = c * Ap - s * Aq
            A[:, q] = s * Ap + c * Aq
            Ap, Aq = A[p, :], A[q, :]
            A[p, :] = c[:, None] * Ap - s[:, None] * Aq
            A[q, :] = s[:, None] * Ap + c[:, None] * Aq
            A[p, q] = 0.0
            A[q, p] = 0.0

            Vp, Vq = V[:, p], V[:, q]
            V[:, p] = c * Vp - s * Vq
            V[:, q] = s * Vp + c * Vq
    if _off_norm(A) <= tol * scale:
        return A, V
    raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")


def fix_signs(V):
    """Flip columns so the largest-magnitude entry of each is positive."""
    V = np.array(V, dtype=float)
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.where(V[idx, np.arange(V.shape[1])] < 0, -1.0, 1.0)
    return V * signs


def eig_sym(A, guess=None) -> SpectralDecomposition:
    """Full eigendecomposition of a symmetric matrix.

    ``guess`` is an optional orthogonal matrix (e.g. the eigenvectors of a
    nearby matrix) used as a warm start; the result is the same
    decomposition up to the convergence tolerance.
    """
    A = as_symmetric(A)
    k = A.shape[0]
    if guess is None:
        V = np.eye(k)
        B = 0.5 * (A + A.T)
    else:
        V = np.array(guess, dtype=float)
        if V.shape != (k, k):
            raise InvalidInput("warm-start guess must match the matrix shape")
        B = V.T @ A @ V
        B = 0.5 * (B + B.T)
    B, V = _jacobi(B, V)
    vals = np.diag(B).copy()
    order = np.argsort(-vals, kind="stable")
    return SpectralDecomposition(vals[order], fix_signs(V[:, order]))


def top_d(A, d, guess=None):
    """Leading ``d`` eigenvectors (k x d) and eigenvalues of ``A``."""
    A = as_symmetric(A)
    if not 1 <= d <= A.shape[0]:
        raise InvalidInput(f"d must be in [1, {A.shape[0]}], got {d}")
    vals, vecs = eig_sym(A, guess=guess)
    return vecs[:, :d], vals[:d]


def random_semi_orthogonal(k, d, seed=None) -> np.ndarray:
    """Haar-distributed k x d frame (QR of a Gaussian matrix, diag(R) > 0)."""
    if not 0 <= d <= k:
        raise InvalidInput(f"need 0 <= d <= k, got d={d}, k={k}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    G = rng.standard_normal((k, d))
    if d == 0:
        return G
    Q, R = np.linalg.qr(G)
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


def orthogonal_complement(U1, tol=1e-8) -> np.ndarray:
    """Rows spanning the orthogonal complement of span(U1), shape (k-d) x k.

    Built by Gram-Schmidt over the canonical vectors e_1, ..., e_k, so the
    result is deterministic.
    """
    U1 = as_basis(U1, "U1")
    k, d = U1.shape
    if d == k:
        raise EmptyComplement("basis spans the whole space")
    basis = [U1[:, j] for j in range(d)]
    rows = []
    for i in range(k):
        v = np.zeros(k)
        v[i] = 1.0
        for _ in range(2):
            for b in basis:
                v -= (b @ v) * b
        norm = np.linalg.norm(v)
        if norm < tol:
            continue
        v /= norm
        basis.append(v)
        rows.append(v)
        if len(rows) == k - d:
            break
    return np.array(rows)


def principal_angles(U1, U2) -> np.ndarray:
    """Principal angles (ascending, radians) between span(U1) and span(U2)."""
    U1 = as_basis(U1, "U1")
    U2 = as_basis(U2, "U2")
    if U1.shape != U2.shape:
        raise InvalidInput(f"basis shapes differ: {U1.shape} vs {U2.shape}")
    M = U2.T @ U1
    gram = M.T @ M
    vals = eig_sym(0.5 * (gram + gram.T)).eigenvalues
    s = np.clip(np.sqrt(np.clip(vals, 0.0, None)), 0.0, 1.0)
    return np.arccos(s)
