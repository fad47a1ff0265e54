"""Turning a switching-subspace change into an emerging-subspace one.

When the pre-change covariance already carries a known spike along U1 and
the change moves it to U2, projecting every observation onto the orthogonal
complement of span(U1) removes the pre-change spike.  What is left of U2
after the projection is a spike that appears only at the change, so the
detectors for the emerging-subspace problem apply to the projected stream.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, NoDetectableChange
from .linalg import as_basis, orthogonal_complement, principal_angles

RESIDUAL_FLOOR = 1e-12
IDENTITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SwitchingProblem:
    """Spike of strengths ``Lambda`` switching from span(U1) to span(U2)."""

    U1: np.ndarray
    U2: np.ndarray
    Lambda: np.ndarray
    sigma2: float = 1.0

    def __post_init__(self):
        U1, U2 = as_basis(self.U1, "U1"), as_basis(self.U2, "U2")
        if U1.shape != U2.shape:
            raise InvalidInput(f"U1 is {U1.shape} but U2 is {U2.shape}")
        lam = np.atleast_1d(np.asarray(self.Lambda, float))
        if lam.shape != (U1.shape[1],) or np.any(~(lam > 0)):
            raise InvalidInput("Lambda needs one positive entry per column of U1")
        if not self.sigma2 > 0:
            raise InvalidInput(f"sigma2 must be positive, got {self.sigma2}")
        object.__setattr__(self, "U1", U1)
        object.__setattr__(self, "U2", U2)
        object.__setattr__(self, "Lambda", lam)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def k(self):
        return self.U1.shape[0]

    @property
    def d(self):
        return self.U1.shape[1]


@dataclass(frozen=True, eq=False)
class ReducedProblem:
    """Result of :func:`reduce_switching`.

    ``U`` is the normalized projected direction matrix QU2 / ||QU2||_F.  For
    d > 1 its columns need not be orthonormal, so the exact post-change
    covariance of the projected data is :meth:`post_covariance`, while
    ``Lambda_tilde`` serves only to size the detector's drift.
    """

    Q: np.ndarray
    U: np.ndarray
    Lambda_tilde: np.ndarray
    residual_energy: float
    sigma2: float
    projected: np.ndarray  # QU2, unnormalized
    Lambda: np.ndarray

    @property
    def dim(self):
        return self.Q.shape[0]

    @property
    def rho_min(self):
        """Smallest reduced signal-to-noise ratio min(Lambda_tilde) / sigma2."""
        return float(self.Lambda_tilde.min() / self.sigma2)

    def pre_covariance(self):
        return self.sigma2 * np.eye(self.dim)

    def post_covariance(self):
        P = self.projected
        return self.sigma2 * np.eye(self.dim) + (P * self.Lambda) @ P.T


def reduce_switching(p: SwitchingProblem) -> ReducedProblem:
    """Project the switching problem onto the complement of span(U1)."""
    Q = orthogonal_complement(p.U1)
    QU2 = Q @ p.U2
    overlap = float(np.linalg.norm(p.U2.T @ p.U1) ** 2)
    residual = p.d - overlap
    via_angles = float(np.sum(np.sin(principal_angles(p.U1, p.U2)) ** 2))
    # The principal angles and the overlap norm are two routes to the same
    # number; disagreement means the bases were not orthonormal enough.
    if abs(residual - via_angles) > IDENTITY_TOL:
        raise InvalidInput(f"principal-angle identity off by {abs(residual - via_angles):.3g}")
    if residual <= RESIDUAL_FLOOR:
        raise NoDetectableChange("span(U2) lies inside span(U1); the projection removes the change")
    norm = float(np.linalg.norm(QU2))
    return ReducedProblem(
        Q=Q,
        U=QU2 / norm,
        Lambda_tilde=residual * p.Lambda,
        residual_energy=residual,
        sigma2=p.sigma2,
        projected=QU2,
        Lambda=p.Lambda,
    )


def project_stream(Q, xs):
    """Lazily yield y_t = Q x_t for each observation in ``xs``."""
    Q = np.asarray(Q, float)
    k = Q.shape[1]
    for x in xs:
        x = np.asarray(x, float)
        if x.shape != (k,):
            raise InvalidInput(f"observation has shape {x.shape}, expected ({k},)")
        yield Q @ x


def project(Q, X):
    """Project a whole (n, k) block at once."""
    Q, X = np.asarray(Q, float), np.asarray(X, float)
    if X.ndim != 2 or X.shape[1] != Q.shape[1]:
        raise InvalidInput(f"data has shape {X.shape}, expected (n, {Q.shape[1]})")
    return X @ Q.T
