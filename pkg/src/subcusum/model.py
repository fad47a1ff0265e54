"""Spiked covariance models, seeded samplers and change scenarios."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .linalg import as_basis, random_semi_orthogonal

NEVER = math.inf  # change-point sentinel for pure pre-change streams
SCENARIOS = ("rank1-dense", "rank1-sparse", "rankd-uniform", "rankd-nonuniform")
DEFAULT_SUBSPACE_SEED = 20240601


def derive_seed(seed, replicate) -> np.random.SeedSequence:
    """Independent sub-seed for Monte-Carlo replicate ``replicate``."""
    return np.random.SeedSequence(int(seed), spawn_key=(int(replicate),))


def make_rng(seed, replicate=None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if replicate is None:
        return np.random.default_rng(seed)
    return np.random.default_rng(derive_seed(seed, replicate))


@dataclass(frozen=True, eq=False)
class SpikedCovariance:
    """N(0, sigma2 I_k + U diag(lambdas) U^T); d = 0 is pure noise."""

    k: int
    sigma2: float
    basis: np.ndarray = None
    lambdas: np.ndarray = None

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise InvalidInput(f"k must be a positive integer, got {self.k}")
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise InvalidInput(f"sigma2 must be positive, got {self.sigma2}")
        basis = np.zeros((self.k, 0)) if self.basis is None else as_basis(self.basis, "U")
        lambdas = np.zeros(0) if self.lambdas is None else np.atleast_1d(np.asarray(self.lambdas, float))
        if basis.shape[0] != self.k:
            raise InvalidInput(f"basis has {basis.shape[0]} rows, expected k={self.k}")
        if lambdas.shape != (basis.shape[1],):
            raise InvalidInput("need one spike strength per basis column")
        if np.any(lambdas <= 0) or np.any(np.diff(lambdas) > 0):
            raise InvalidInput("spike strengths must be positive and non-increasing")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "lambdas", lambdas)
        basis.flags.writeable = False
        lambdas.flags.writeable = False

    @property
    def d(self):
        return self.basis.shape[1]

    @property
    def rho(self):
        return snr(self)

    def covariance(self):
        return self.sigma2 * np.eye(self.k) + (self.basis * self.lambdas) @ self.basis.T

    def to_dict(self):
        return {
            "k": self.k,
            "sigma2": self.sigma2,
            "U": self.basis.tolist(),
            "lambdas": self.lambdas.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            U = doc.get("U")
            return cls(
                k=int(doc["k"]),
                sigma2=float(doc["sigma2"]),
                basis=None if U is None or len(U) == 0 else np.array(U, float).reshape(int(doc["k"]), -1),
                lambdas=doc.get("lambdas") or None,
            )
        except KeyError as exc:
            raise InvalidInput(f"missing field {exc.args[0]!r}") from None


def pure_noise(k, sigma2) -> SpikedCovariance:
    return SpikedCovariance(k, sigma2)


def snr(model: SpikedCovariance) -> np.ndarray:
    return model.lambdas / model.sigma2


def _draw(model, noise):
    """Map a row (or rows) of standard normals [g (k) | h (>= d)] to samples."""
    k, d = model.k, model.d
    x = math.sqrt(model.sigma2) * noise[..., :k]
    # Elementwise accumulation rather than a matrix product: BLAS results can
    # depend on the batch shape, and samples must not depend on chunking.
    for j in range(d):
        x = x + (math.sqrt(model.lambdas[j]) * noise[..., k + j])[..., None] * model.basis[:, j]
    return x


def sample(model: SpikedCovariance, rng) -> np.ndarray:
    """One draw x = sigma g + U Lambda^{1/2} h."""
    rng = make_rng(rng)
    return _draw(model, rng.standard_normal(model.k + model.d))


@dataclass(frozen=True, eq=False)
class ChangeScenario:
    """Samples 1..tau come from ``pre``, samples after tau from ``post``."""

    pre: SpikedCovariance
    post: SpikedCovariance
    tau: float = 0
    name: str = None

    def __post_init__(self):
        if self.pre.k != self.post.k:
            raise InvalidInput("pre- and post-change models differ in dimension")
        if not (self.tau == NEVER or (self.tau >= 0 and int(self.tau) == self.tau)):
            raise InvalidInput(f"tau must be a non-negative integer or inf, got {self.tau}")

    @property
    def k(self):
        return self.pre.k

    def with_tau(self, tau):
        return ChangeScenario(self.pre, self.post, tau, self.name)

    def model_at(self, t):
        return self.pre if t <= self.tau else self.post

    def to_dict(self):
        return {
            "name": self.name,
            "k": self.k,
            "tau": None if self.tau == NEVER else int(self.tau),
            "pre": self.pre.to_dict(),
            "post": self.post.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc):
        """Accepts either explicit ``pre``/``post`` models or a library name."""
        tau = doc.get("tau", 0)
        tau = NEVER if tau is None or tau == "inf" else int(tau)
        if "pre" in doc and "post" in doc:
            return cls(
                SpikedCovariance.from_dict(doc["pre"]),
                SpikedCovariance.from_dict(doc["post"]),
                tau,
                doc.get("name"),
            )
        try:
            return scenario_library(
                doc["name"],
                int(doc["k"]),
                int(doc.get("d", 1)),
                float(doc.get("sigma2", 1.0)),
                lam=float(doc.get("lam", 1.0)),
                tau=tau,
                subspace_seed=int(doc.get("subspace_seed", DEFAULT_SUBSPACE_SEED)),
            )
        except KeyError as exc:
            raise InvalidInput(f"missing field {exc.args[0]!r}") from None


@dataclass(eq=False)
class SeededStream:
    """Unbounded, reproducible observation stream for one scenario.

    Every step consumes ``k + max(d_pre, d_post)`` standard normals
    regardless of regime, so streams that share a seed but differ only in
    tau agree sample-for-sample up to the change.
    """

    scenario: ChangeScenario
    seed: object = 0
    replicate: int = None
    block: int = 256
    cursor: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)
    _buf: np.ndarray = field(init=False, repr=False)
    _pos: int = field(init=False, repr=False)

    def __post_init__(self):
        self._rng = make_rng(self.seed, self.replicate)
        self._width = self.scenario.k + max(self.scenario.pre.d, self.scenario.post.d)
        self._buf = np.empty((0, self._width))
        self._pos = 0

    def __iter__(self):
        return self

    def __next__(self):
        return self.take(1)[0]

    def _noise(self, n):
        out = np.empty((n, self._width))
        filled = 0
        while filled < n:
            if self._pos == len(self._buf):
                self._buf = self._rng.standard_normal((self.block, self._width))
                self._pos = 0
            m = min(n - filled, len(self._buf) - self._pos)
            out[filled:filled + m] = self._buf[self._pos:self._pos + m]
            self._pos += m
            filled += m
        return out

    def take(self, n) -> np.ndarray:
        """Next ``n`` observations as an (n, k) array."""
        noise = self._noise(n)
        t = self.cursor + 1 + np.arange(n)
        pre = t <= self.scenario.tau
        x = np.empty((n, self.scenario.k))
        if pre.any():
            x[pre] = _draw(self.scenario.pre, noise[pre])
        if (~pre).any():
            x[~pre] = _draw(self.scenario.post, noise[~pre])
        self.cursor += n
        return x


def stream(scenario: ChangeScenario, seed=0, replicate=None) -> SeededStream:
    return SeededStream(scenario, seed, replicate)


def scenario_library(name, k, d=1, sigma2=1.0, lam=1.0, tau=0,
                     subspace_seed=DEFAULT_SUBSPACE_SEED) -> ChangeScenario:
    """Named simulation settings: isotropic noise before, a spike after.

    ``lam`` is the spike strength for the rank-1 and uniform settings; the
    non-uniform setting uses strengths linspace(2, 1, d).
    """
    k, d = int(k), int(d)
    if name == "rank1-dense":
        U = np.full((k, 1), 1.0 / math.sqrt(k))
        lambdas = [lam]
    elif name == "rank1-sparse":
        U = np.zeros((k, 1))
        U[0, 0] = 1.0
        lambdas = [lam]
    elif name == "rankd-uniform":
        U = random_semi_orthogonal(k, d, subspace_seed)
        lambdas = np.full(d, float(lam))
    elif name == "rankd-nonuniform":
        U = random_semi_orthogonal(k, d, subspace_seed)
        lambdas = np.linspace(2.0, 1.0, d) if d > 1 else np.array([2.0])
    else:
        raise InvalidInput(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    post = SpikedCovariance(k, sigma2, U, lambdas)
    return ChangeScenario(pure_noise(k, sigma2), post, tau, name)
