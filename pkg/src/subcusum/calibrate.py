"""Drift formulas and Monte-Carlo calibration of run lengths.

The analytic part covers the Subspace-CUSUM increment means and the
asymptotic covariance of sample eigenvectors.  The Monte-Carlo part
estimates average run lengths (ARL) and detection delays (EDD) and
searches thresholds; see :mod:`subcusum.batch` for the engine.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .batch import FirstPassageRunner
from .errors import CalibrationFailed, DegenerateSpectrum, InvalidInput, ThresholdTooHigh
from .linalg import as_basis, random_semi_orthogonal
from .model import NEVER, ChangeScenario, derive_seed, make_rng, pure_noise

GAP_RTOL = 1e-6
CAP_FACTOR = 50
DEFAULT_CAP = CAP_FACTOR * 5000
MAX_CHUNK_ELEMENTS = 4_000_000
MAX_DRAW_FACTOR = 20  # give up when most runs false-alarm before the change


def drift_delta(d, sigma2, rho_min):
    """Midpoint between the pre-change increment mean and its value at the
    weakest tolerated spike."""
    if not rho_min > 0:
        raise InvalidInput("rho_min must be positive")
    return d * sigma2 * (1.0 + 0.5 * rho_min)


def _check_distinct(rho):
    for i in range(rho.size):
        for j in range(i + 1, rho.size):
            if abs(rho[i] - rho[j]) <= GAP_RTOL * max(abs(rho[i]), abs(rho[j])):
                raise DegenerateSpectrum(f"rho[{i}] and rho[{j}] are not distinct")


def post_change_increment_mean(k, d, rho, sigma2, w):
    """First-order expansion in 1/w of the post-change mean of Z_t."""
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if rho.shape != (d,) or np.any(rho <= 0):
        raise InvalidInput("need d positive SNRs")
    _check_distinct(rho)
    total = sigma2 * float(np.sum(1.0 + rho))
    for i in range(d):
        bracket = (k - 1) / rho[i] ** 2
        bracket += sum((1.0 + rho[j]) ** 2 / (rho[i] - rho[j]) ** 2 for j in range(d) if j != i)
        total += sigma2 / w * (1.0 + rho[i]) * bracket
    return total


def simulate_increment_mean(k, d, rho, sigma2, w, M, seed=0, chunk=4096):
    """Monte-Carlo E[Z_t] after the change, with a random (Haar) subspace.

    Each replicate draws w + 1 post-change samples, estimates the top-d
    eigenvectors from the last w and scores the first.  ``rho = 0``
    entries are allowed and give the pre-change value.
    Returns ``(mean, standard_error)``.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if rho.shape != (d,):
        raise InvalidInput("need one SNR per subspace direction")
    U = random_semi_orthogonal(k, d, make_rng(seed, 2**32))
    chunk = max(1, min(int(chunk), MAX_CHUNK_ELEMENTS // ((w + 1) * k)))
    scale = np.sqrt(sigma2 * rho)
    total = total_sq = 0.0
    done = 0
    for c, lo in enumerate(range(0, M, chunk)):
        n = min(chunk, M - lo)
        rng = make_rng(seed, c)
        X = math.sqrt(sigma2) * rng.standard_normal((n, w + 1, k))
        X += (rng.standard_normal((n, w + 1, d)) * scale) @ U.T
        future = X[:, 1:]
        cov = np.matmul(future.transpose(0, 2, 1), future) / w
        _, vecs = np.linalg.eigh(cov)
        proj = np.einsum("nkd,nk->nd", vecs[:, :, -d:], X[:, 0])
        z = np.sum(proj * proj, axis=1)
        total += z.sum()
        total_sq += (z * z).sum()
        done += n
    mean = total / done
    var = max(total_sq / done - mean * mean, 0.0) * done / max(done - 1, 1)
    return mean, math.sqrt(var / done)


def eigvec_asymptotic_cov(i, rho, sigma2, U):
    """Asymptotic covariance of sqrt(w) (u_hat_i - u_i), with 1 <= i <= d.

    ``sigma2`` does not enter: the covariance depends on the SNRs only.
    """
    U = as_basis(U, "U")
    k, d = U.shape
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if rho.shape != (d,) or np.any(rho <= 0):
        raise InvalidInput("need one positive SNR per column of U")
    if not 1 <= i <= d:
        raise InvalidInput(f"i must be in [1, {d}]")
    _check_distinct(rho)
    a = i - 1
    xi = (1.0 + rho[a]) / rho[a] ** 2 * (np.eye(k) - U @ U.T)
    for j in range(d):
        if j != a:
            coef = (1.0 + rho[a]) * (1.0 + rho[j]) / (rho[a] - rho[j]) ** 2
            xi += coef * np.outer(U[:, j], U[:, j])
    return 0.5 * (xi + xi.T)


# ------------------------------------------------------------ Monte Carlo

@dataclass
class ArlEstimate:
    arl: float
    std_error: float
    replicates: int
    cap_hits: int
    cap: int

    def to_dict(self):
        return dict(vars(self))


@dataclass
class DelayResult:
    edd: float
    std_error: float
    replicates: int
    false_alarms: int
    cap_hits: int = 0

    def to_dict(self):
        return dict(vars(self))


@dataclass
class CalibrationSpec:
    config: object
    target_arl: float
    replicates: int = 1000
    b_lo: float = 1.0
    b_hi: float = 50.0
    rtol: float = 0.05
    seed: int = 0
    sigma2: float = 1.0
    n_jobs: int = 1

    def __post_init__(self):
        if not self.b_lo < self.b_hi:
            raise InvalidInput("need b_lo < b_hi")
        if self.replicates < 100:
            raise InvalidInput("need at least 100 replicates")
        if not 0 < self.rtol <= 0.2:
            raise InvalidInput("rtol must lie in (0, 0.2]")
        if not self.target_arl > 0:
            raise InvalidInput("target_arl must be positive")

    def to_dict(self):
        doc = {k: v for k, v in vars(self).items() if k != "config"}
        doc["config"] = self.config.to_dict()
        return doc


@dataclass
class CalibrationResult:
    threshold: float
    arl: float
    std_error: float
    replicates: int
    cap_hits: int = 0
    evaluations: list = field(default_factory=list)

    def to_dict(self):
        return dict(vars(self))


def _config_dim(config):
    return config.k


def null_scenario(config, sigma2=1.0):
    """Pure pre-change stream matching the detector's dimension."""
    model = pure_noise(_config_dim(config), sigma2)
    return ChangeScenario(model, model, NEVER, "null")


def _summarize(times, capped, cap):
    m = times.size
    mean = float(times.mean())
    se = float(times.std(ddof=1) / math.sqrt(m)) if m > 1 else math.nan
    return ArlEstimate(mean, se, m, int(capped.sum()), cap)


def estimate_arl(config, b, M, seed=0, sigma2=1.0, cap=DEFAULT_CAP, n_jobs=1, runner=None):
    """Mean false-alarm time over M independent pre-change runs.

    Runs that never alarm are counted at the cap, so the estimate is then a
    lower bound; the number of such runs is reported.
    """
    if M < 1:
        raise InvalidInput("M must be positive")
    runner = runner or FirstPassageRunner(config, null_scenario(config, sigma2), seed, M,
                                          cap=cap, n_jobs=n_jobs)
    times, capped = runner.alarm_times(b, M)
    if capped.all():
        raise ThresholdTooHigh(f"all {M} replicates reached the cap of {runner.cap} samples")
    return _summarize(times, capped, runner.cap)


def find_threshold(spec: CalibrationSpec) -> CalibrationResult:
    """Smallest threshold whose Monte-Carlo ARL reaches ``spec.target_arl``.

    All evaluations share the same replicate paths, so the estimated ARL is
    a non-decreasing step function of b.  The search scans upwards from the
    lower end of the bracket, using a log-linear extrapolation of ARL(b) to
    size its steps, and then bisects.  Each comparison with the target only
    simulates until the answer is certain, which keeps overshooting cheap.
    ``evaluations`` lists (b, ARL) pairs; for thresholds found to be above
    the target the ARL entry is a lower bound.
    """
    target = float(spec.target_arl)
    cap = int(CAP_FACTOR * target)
    runner = FirstPassageRunner(spec.config, null_scenario(spec.config, spec.sigma2),
                                spec.seed, spec.replicates, cap=cap, n_jobs=spec.n_jobs)
    history = []

    def above(b):
        ok, mean = runner.reaches(b, target)
        history.append((float(b), mean))
        return ok, mean

    lo, hi = float(spec.b_lo), float(spec.b_hi)
    for _ in range(6):
        ok, lo_arl = above(lo)
        if not ok:
            break
        lo, hi = max(lo - (hi - lo), 0.0), lo
    else:
        raise CalibrationFailed("could not bracket the target ARL from below")

    max_step = (hi - lo) / 8.0
    step = (hi - lo) / 32.0
    prev_b, prev_arl = lo, max(lo_arl, 1.0)
    expansions = 0
    while True:
        b = lo + step
        ok, cur = above(b)
        if ok:
            hi = b
            break
        cur = max(cur, 1.0)
        lo = b
        if lo > hi:
            expansions += 1
            if expansions > 5:
                raise CalibrationFailed(f"ARL stays below {target} up to b={lo:.4f}")
            hi += hi - float(spec.b_lo)
        slope = (math.log(cur) - math.log(prev_arl)) / (b - prev_b)
        prev_b, prev_arl = b, cur
        if slope > 0:
            step = math.log(1.5 * target / cur) / slope
        else:
            step = 2.0 * step
        step = min(max(step, 1e-3 * max_step), max_step)

    for _ in range(200):
        if hi - lo <= 1e-6 * max(1.0, abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if above(mid)[0]:
            hi = mid
        else:
            lo = mid
    # exact estimates on both sides of the crossing; report the closer one
    est = estimate_arl(spec.config, hi, spec.replicates, runner=runner)
    below = estimate_arl(spec.config, lo, spec.replicates, runner=runner)
    history.extend([(hi, est.arl), (lo, below.arl)])
    if abs(below.arl - target) < abs(est.arl - target):
        hi, est = lo, below
    if abs(est.arl - target) > spec.rtol * target:
        raise CalibrationFailed(
            f"closest ARL {est.arl:.1f} at b={hi:.4f} misses target {target}")
    return CalibrationResult(hi, est.arl, est.std_error, est.replicates, est.cap_hits,
                             history)


def estimate_edd(config, b, scenario, M, seed=0, cap=DEFAULT_CAP, n_jobs=1, runner=None):
    """Mean delay (alarm time - tau) over M runs that do not alarm by tau.

    Runs alarming at or before tau are discarded and replaced by fresh
    replicates; their count is reported as ``false_alarms``.
    """
    if scenario.tau == NEVER:
        raise InvalidInput("EDD needs a finite change-point")
    runner = runner or FirstPassageRunner(config, scenario, seed, M, cap=cap, n_jobs=n_jobs)
    return _delays(runner, b, scenario.tau, M)


def _delays(runner, b, tau, M):
    while True:
        times, capped = runner.alarm_times(b)
        valid = np.flatnonzero(times > tau)
        if valid.size >= M:
            break
        if runner.n >= MAX_DRAW_FACTOR * M:
            raise CalibrationFailed(
                f"only {valid.size} of {runner.n} runs stayed silent until tau={tau}")
        missing = M - valid.size
        runner.extend(max(missing * 2, 16))
    use = valid[:M]
    false_alarms = int(np.sum(times[:use[-1] + 1] <= tau))
    delay = (times[use] - tau).astype(float)
    se = float(delay.std(ddof=1) / math.sqrt(M)) if M > 1 else math.nan
    return DelayResult(float(delay.mean()), se, M, false_alarms, int(capped[use].sum()))


@dataclass
class CurvePoint:
    threshold: float
    arl: float
    arl_se: float
    edd: float
    edd_se: float


def arl_edd_curve(config, scenario, b_grid, M, seed=0, sigma2=None, cap=DEFAULT_CAP, n_jobs=1):
    """(ARL, EDD) pairs along an ascending threshold grid."""
    b_grid = [float(b) for b in b_grid]
    if any(b2 < b1 for b1, b2 in zip(b_grid, b_grid[1:])):
        raise InvalidInput("threshold grid must be ascending")
    sigma2 = scenario.pre.sigma2 if sigma2 is None else sigma2
    null = FirstPassageRunner(config, null_scenario(config, sigma2),
                              int(derive_seed(seed, 0).generate_state(1)[0]), M,
                              cap=cap, n_jobs=n_jobs)
    post = FirstPassageRunner(config, scenario, int(derive_seed(seed, 1).generate_state(1)[0]),
                              M, cap=cap, n_jobs=n_jobs)
    points = []
    for b in b_grid:
        a = estimate_arl(config, b, M, runner=null)
        e = _delays(post, b, scenario.tau, M)
        points.append(CurvePoint(b, a.arl, a.std_error, e.edd, e.std_error))
    return points
