"""Online change detectors sharing one step-wise contract.

Every detector consumes one observation per ``step`` call and returns its
decision statistic, or ``None`` while its buffers are still filling.  The
first arrival index whose statistic reaches the threshold is the alarm
time; detectors keep computing afterwards so a full trajectory can be
exported, but the alarm time never moves.
"""

import csv
import io
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import InvalidInput
from .linalg import as_basis, eig_sym
from .model import SpikedCovariance

SOLVERS = ("jacobi", "lapack")


def kl_drifts(sigma2, rho):
    """Pre- and post-change means of the per-sample log-likelihood ratio.

    Returned in nats; the running CUSUM statistic uses the LLR scaled by
    ``2 * sigma2``, so its increments have means ``2 * sigma2`` times these.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if np.any(rho <= 0):
        raise InvalidInput("rho must be positive")
    log1p = np.log1p(rho)
    pre = -0.5 * float(np.sum(log1p - rho / (1.0 + rho)))
    post = 0.5 * float(np.sum(rho - log1p))
    return pre, post


@dataclass
class AlarmReport:
    alarm_time: int | None
    trajectory: np.ndarray
    warmup_length: int
    threshold: float = math.inf

    def times(self):
        """Arrival index of each trajectory entry."""
        return self.warmup_length + 1 + np.arange(len(self.trajectory))

    def to_dict(self):
        return {
            "alarm_time": self.alarm_time,
            "threshold": None if math.isinf(self.threshold) else self.threshold,
            "warmup_length": self.warmup_length,
            "n_statistics": len(self.trajectory),
        }

    def to_csv(self):
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["time", "statistic", "alarmed"])
        for t, value in zip(self.times(), self.trajectory):
            writer.writerow([int(t), repr(float(value)), int(value >= self.threshold)])
        return out.getvalue()


class Detector:
    warmup_length = 0

    def __init__(self, k, threshold=math.inf):
        self.k = int(k)
        self.threshold = float(threshold)
        self.reset()

    def reset(self):
        self.t = 0
        self.alarm_time = None
        self.statistic = None

    @property
    def stopped(self):
        return self.alarm_time is not None

    def step(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.k:
            raise InvalidInput(f"observation has dimension {x.shape[0]}, expected {self.k}")
        self.t += 1
        stat = self._update(x)
        self.statistic = stat
        if stat is not None and self.alarm_time is None and stat >= self.threshold:
            self.alarm_time = self.t
        return stat

    def _update(self, x):
        raise NotImplementedError

    def run(self, xs, stop_at_alarm=True) -> AlarmReport:
        """Feed an iterable of observations and collect the trajectory."""
        stats = []
        for x in xs:
            stat = self.step(x)
            if stat is not None:
                stats.append(stat)
            if stop_at_alarm and self.stopped:
                break
        return AlarmReport(self.alarm_time, np.array(stats, dtype=float),
                           self.warmup_length, self.threshold)


class ExactCusum(Detector):
    """Oracle CUSUM with the true post-change subspace and SNRs.

    The increment is the log-likelihood ratio times ``2 * sigma2``.
    """

    def __init__(self, sigma2, basis, rho, threshold=math.inf):
        self.basis = as_basis(basis, "U")
        self.rho = np.atleast_1d(np.asarray(rho, dtype=float))
        if self.rho.shape != (self.basis.shape[1],) or np.any(self.rho <= 0):
            raise InvalidInput("need one positive SNR per basis column")
        self.sigma2 = float(sigma2)
        self.weights = self.rho / (1.0 + self.rho)
        self.offset = self.sigma2 * float(np.sum(np.log1p(self.rho)))
        super().__init__(self.basis.shape[0], threshold)

    def reset(self):
        super().reset()
        self.running = 0.0
        self.increment = None

    def increment_of(self, x):
        proj = self.basis.T @ x
        return float(self.weights @ (proj * proj)) - self.offset

    def _update(self, x):
        self.increment = self.increment_of(x)
        self.running = max(self.running, 0.0) + self.increment
        return self.running


def _leading(cov, d, solver, guess):
    if solver == "lapack":
        vals, vecs = np.linalg.eigh(cov)
        return vals[::-1], vecs[:, ::-1]
    return eig_sym(cov, guess=guess)


class _Window:
    """Ring buffer of recent samples with an incrementally updated scatter.

    The scatter matrix (sum of outer products over the window) is rebuilt
    from the buffer every ``refresh`` updates to bound rounding drift.
    """

    def __init__(self, k, size, refresh):
        self.buf = np.zeros((size, k))
        self.scatter = np.zeros((k, k))
        self.size = size
        self.refresh = refresh
        self.count = 0

    def push(self, x):
        """Insert x; return the sample that fell out (or None)."""
        slot = self.count % self.size
        old = self.buf[slot].copy() if self.count >= self.size else None
        self.buf[slot] = x
        self.count += 1
        self.scatter += np.outer(x, x)
        if old is not None:
            self.scatter -= np.outer(old, old)
        if self.count % self.refresh == 0:
            n = min(self.count, self.size)
            recent = self.buf if n == self.size else self.buf[:n]
            self.scatter = recent.T @ recent
        return old


class SubspaceCusum(Detector):
    """Multi-rank Subspace-CUSUM.

    Sample x_t is scored against the top-d eigenvectors of the window
    covariance of x_{t+1}, ..., x_{t+w}, so it is processed when x_{t+w}
    arrives.  The trajectory is indexed by the scored time t and the alarm
    is reported at the arrival index t + w.
    """

    def __init__(self, k, d, w, drift, threshold=math.inf, solver="jacobi"):
        if not 1 <= d <= k:
            raise InvalidInput(f"need 1 <= d <= k, got d={d}, k={k}")
        if w < max(d, 2):
            raise InvalidInput(f"window w={w} must be at least max(d, 2)")
        if not drift > 0:
            raise InvalidInput("drift must be positive")
        if solver not in SOLVERS:
            raise InvalidInput(f"unknown solver {solver!r}")
        self.d, self.w, self.drift, self.solver = int(d), int(w), float(drift), solver
        self.warmup_length = self.w
        super().__init__(k, threshold)

    def reset(self):
        super().reset()
        # one extra slot holds the sample awaiting its score
        self._window = _Window(self.k, self.w + 1, self.w)
        self._vecs = None
        self.running = 0.0
        self.increment = None

    def _update(self, x):
        win = self._window
        win.push(x)
        if win.count <= self.w:
            return None
        scored = win.buf[(win.count - 1 - self.w) % win.size]
        cov = (win.scatter - np.outer(scored, scored)) / self.w
        cov = 0.5 * (cov + cov.T)
        _, vecs = _leading(cov, self.d, self.solver, self._vecs)
        self._vecs = vecs
        proj = vecs[:, :self.d].T @ scored
        self.increment = float(proj @ proj)
        self.running = max(self.running, 0.0) + self.increment - self.drift
        return self.running


class EigenvalueShewhart(Detector):
    """One-shot chart on the largest eigenvalue of the window covariance."""

    def __init__(self, k, w, threshold=math.inf, solver="jacobi"):
        if w < 2:
            raise InvalidInput("window must hold at least 2 samples")
        if solver not in SOLVERS:
            raise InvalidInput(f"unknown solver {solver!r}")
        self.w, self.solver = int(w), solver
        self.warmup_length = self.w - 1
        super().__init__(k, threshold)

    def reset(self):
        super().reset()
        self._window = _Window(self.k, self.w, self.w)
        self._vecs = None

    def _update(self, x):
        self._window.push(x)
        if self._window.count < self.w:
            return None
        cov = self._window.scatter / self.w
        cov = 0.5 * (cov + cov.T)
        vals, vecs = _leading(cov, 1, self.solver, self._vecs)
        self._vecs = vecs
        return float(vals[0])


class Hotelling(Detector):
    """x^T Sigma0^{-1} x with Sigma0 = sigma2 I."""

    def __init__(self, k, sigma2, threshold=math.inf):
        self.sigma2 = float(sigma2)
        super().__init__(k, threshold)

    def _update(self, x):
        return float(x @ x) / self.sigma2


def glr_segment_statistic(eigenvalues, n, sigma2):
    """Generalized LLR of a rank-limited spike against sigma2 I for one segment.

    ``eigenvalues`` are the leading sample-covariance eigenvalues of the
    segment; directions with eigenvalue at or below sigma2 contribute zero
    because the spike MLE is truncated at zero there.
    """
    ratio = np.asarray(eigenvalues, dtype=float) / sigma2
    ratio = ratio[ratio > 1.0]
    return 0.5 * n * float(np.sum(ratio - np.log(ratio) - 1.0))


class WindowGLR(Detector):
    """Window-limited GLR over candidate change points on a stride grid."""

    def __init__(self, k, d, sigma2, threshold=math.inf, max_window=200, stride=5):
        if not 1 <= d <= k:
            raise InvalidInput(f"need 1 <= d <= k, got d={d}, k={k}")
        if stride < 1 or max_window < stride:
            raise InvalidInput("need 1 <= stride <= max_window")
        self.d, self.sigma2 = int(d), float(sigma2)
        self.max_window, self.stride = int(max_window), int(stride)
        super().__init__(k, threshold)

    def reset(self):
        super().reset()
        self._history = np.zeros((0, self.k))

    def _update(self, x):
        hist = np.vstack([self._history, x])[-self.max_window:]
        self._history = hist
        lengths = np.arange(self.stride, len(hist) + 1, self.stride)
        lengths = lengths[lengths >= self.d + 1]
        if lengths.size == 0:
            return 0.0
        # suffix scatters for the candidate segments
        outer = hist[:, :, None] * hist[:, None, :]
        suffix = np.cumsum(outer[::-1], axis=0)
        covs = suffix[lengths - 1] / lengths[:, None, None]
        vals = np.linalg.eigvalsh(covs)[:, ::-1][:, :self.d]
        best = max(glr_segment_statistic(v, n, self.sigma2) for v, n in zip(vals, lengths))
        return max(best, 0.0)


# ---------------------------------------------------------------- configs

@dataclass(frozen=True)
class ExactCusumConfig:
    sigma2: float
    basis: np.ndarray = field(repr=False)
    rho: tuple
    threshold: float = math.inf
    kind = "exact-cusum"

    def __post_init__(self):
        object.__setattr__(self, "basis", as_basis(self.basis, "U"))
        object.__setattr__(self, "rho", tuple(float(r) for r in np.atleast_1d(self.rho)))

    @classmethod
    def from_model(cls, post: SpikedCovariance, threshold=math.inf):
        return cls(post.sigma2, post.basis, tuple(post.rho), threshold)

    @property
    def k(self):
        return self.basis.shape[0]

    def build(self):
        return ExactCusum(self.sigma2, self.basis, self.rho, self.threshold)

    def to_dict(self):
        return {"detector": self.kind, "sigma2": self.sigma2, "U": self.basis.tolist(),
                "rho": list(self.rho), "threshold": _dump_threshold(self.threshold)}


@dataclass(frozen=True)
class SubspaceCusumConfig:
    k: int
    d: int
    w: int
    drift: float
    threshold: float = math.inf
    solver: str = "jacobi"
    kind = "subspace-cusum"

    def __post_init__(self):
        if not 1 <= self.d <= self.k:
            raise InvalidInput(f"need 1 <= d <= k, got d={self.d}, k={self.k}")
        if self.w < max(self.d, 2):
            raise InvalidInput(f"window w={self.w} must be at least max(d, 2)")
        if not self.drift > 0:
            raise InvalidInput("drift must be positive")

    def build(self):
        return SubspaceCusum(self.k, self.d, self.w, self.drift, self.threshold, self.solver)

    def to_dict(self):
        doc = {"detector": self.kind, **asdict(self)}
        doc["threshold"] = _dump_threshold(self.threshold)
        return doc


@dataclass(frozen=True)
class EigenChartConfig:
    k: int
    w: int
    threshold: float = math.inf
    solver: str = "jacobi"
    kind = "eigchart"

    def build(self):
        return EigenvalueShewhart(self.k, self.w, self.threshold, self.solver)

    def to_dict(self):
        doc = {"detector": self.kind, **asdict(self)}
        doc["threshold"] = _dump_threshold(self.threshold)
        return doc


@dataclass(frozen=True)
class HotellingConfig:
    k: int
    sigma2: float
    threshold: float = math.inf
    kind = "hotelling"

    def build(self):
        return Hotelling(self.k, self.sigma2, self.threshold)

    def to_dict(self):
        doc = {"detector": self.kind, **asdict(self)}
        doc["threshold"] = _dump_threshold(self.threshold)
        return doc


@dataclass(frozen=True)
class GLRConfig:
    k: int
    d: int
    sigma2: float
    threshold: float = math.inf
    max_window: int = 200
    stride: int = 5
    kind = "glr"

    def build(self):
        return WindowGLR(self.k, self.d, self.sigma2, self.threshold, self.max_window, self.stride)

    def to_dict(self):
        doc = {"detector": self.kind, **asdict(self)}
        doc["threshold"] = _dump_threshold(self.threshold)
        return doc


CONFIGS = {c.kind: c for c in (ExactCusumConfig, SubspaceCusumConfig, EigenChartConfig,
                               HotellingConfig, GLRConfig)}
DETECTOR_NAMES = tuple(CONFIGS)


def _dump_threshold(b):
    return None if math.isinf(b) else float(b)


def with_threshold(config, threshold):
    return replace(config, threshold=float(threshold))


def config_from_dict(doc):
    """Build a detector config from a JSON-style mapping."""
    doc = dict(doc)
    kind = doc.pop("detector", None)
    if kind not in CONFIGS:
        raise InvalidInput(f"field 'detector' must be one of {', '.join(CONFIGS)}, got {kind!r}")
    threshold = doc.pop("threshold", None)
    doc["threshold"] = math.inf if threshold is None else float(threshold)
    if kind == "exact-cusum":
        if "U" not in doc:
            raise InvalidInput("field 'U' is required for exact-cusum")
        doc["basis"] = np.array(doc.pop("U"), dtype=float)
        doc.pop("k", None)
    cls = CONFIGS[kind]
    try:
        return cls(**doc)
    except TypeError as exc:
        raise InvalidInput(f"bad {kind} configuration: {exc}") from None
