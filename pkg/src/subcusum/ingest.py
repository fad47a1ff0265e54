"""Swarm trajectory ingestion and feature extraction.

A swarm file is a CSV with one row per (frame, agent) and columns
``frame, agent, x, y, vx, vy``.  Each frame becomes one observation vector of
length 4n: the centroid-centred positions followed by the velocities, both
in agent order with x before y.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, ParseError
from .model import make_rng

COLUMNS = ("frame", "agent", "x", "y", "vx", "vy")
NORMALIZATIONS = ("rms", "global-std", "none")


@dataclass(frozen=True, eq=False)
class SwarmFrame:
    frame_index: int
    positions: np.ndarray   # (n, 2)
    velocities: np.ndarray  # (n, 2)

    def __post_init__(self):
        P = np.asarray(self.positions, float).reshape(-1, 2)
        V = np.asarray(self.velocities, float).reshape(-1, 2)
        if P.shape != V.shape or P.shape[0] < 1:
            raise InvalidInput("positions and velocities must list the same n >= 1 agents")
        object.__setattr__(self, "positions", P)
        object.__setattr__(self, "velocities", V)

    @property
    def n(self):
        return self.positions.shape[0]


def _number(cell, row, column, kind=float):
    try:
        value = kind(cell)
    except (TypeError, ValueError):
        raise ParseError(f"column {column!r}: {cell!r} is not a number", row) from None
    if kind is float and not math.isfinite(value):
        raise ParseError(f"column {column!r}: {cell!r} is not finite", row)
    return value


def read_swarm_csv(path):
    """Parse a swarm CSV into frames ordered by frame index.

    Rows may appear in any order.  Row numbers in error messages count the
    header as row 1, matching what a spreadsheet shows.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", 1) from None
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise ParseError(f"missing column(s) {', '.join(missing)}", 1)
        col = {c: header.index(c) for c in COLUMNS}
        records = {}
        first_row = {}
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise ParseError(f"expected {len(header)} cells, found {len(row)}", row_no)
            frame = _number(row[col["frame"]], row_no, "frame", int)
            agent = _number(row[col["agent"]], row_no, "agent", int)
            values = [_number(row[col[c]], row_no, c) for c in COLUMNS[2:]]
            agents = records.setdefault(frame, {})
            first_row.setdefault(frame, row_no)
            if agent in agents:
                raise ParseError(f"agent {agent} appears twice in frame {frame}", row_no)
            agents[agent] = values
    if not records:
        raise ParseError("no data rows", 2)
    frames = []
    n = None
    for frame in sorted(records):
        agents = records[frame]
        if n is None:
            n = len(agents)
        elif len(agents) != n:
            raise ParseError(f"frame {frame} has {len(agents)} agents, expected {n}", first_row[frame])
        block = np.array([agents[a] for a in sorted(agents)])
        frames.append(SwarmFrame(frame, block[:, :2], block[:, 2:]))
    return frames


def write_swarm_csv(path, frames):
    """Write frames in the format read by :func:`read_swarm_csv`."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(COLUMNS)
        for f in frames:
            for a in range(f.n):
                out.writerow([f.frame_index, a, *map(repr, map(float, f.positions[a])),
                              *map(repr, map(float, f.velocities[a]))])


def preprocess(frames, normalization="rms"):
    """Feature matrix of shape (len(frames), 4n), one row per frame.

    ``rms`` scales each frame's position block and velocity block so that
    the agents' vectors have unit root-mean-square length (all-zero blocks
    stay zero).  ``global-std`` divides each block by its standard deviation
    over the whole recording.  ``none`` only centres the positions.
    """
    if normalization not in NORMALIZATIONS:
        raise InvalidInput(f"normalization must be one of {', '.join(NORMALIZATIONS)}")
    if len(frames) == 0:
        raise InvalidInput("no frames to preprocess")
    P = np.stack([f.positions for f in frames])
    V = np.stack([f.velocities for f in frames])
    P = P - P.mean(axis=1, keepdims=True)
    T = P.shape[0]
    P, V = P.reshape(T, -1), V.reshape(T, -1)
    if normalization == "rms":
        n = P.shape[1] // 2
        for block in (P, V):
            # root-mean-square length of the agents' 2-D vectors
            scale = np.sqrt(np.sum(block * block, axis=1) / n)
            nz = scale > 0
            block[nz] /= scale[nz, None]
    elif normalization == "global-std":
        for block in (P, V):
            s = float(block.std())
            if s > 0:
                block /= s
    return np.hstack([P, V])


def scale_01(values):
    """Affine map of a trajectory onto [0, 1]; a flat trajectory maps to 0.

    Non-finite entries (warm-up periods) are kept as NaN and ignored when
    finding the range.
    """
    v = np.asarray(values, float)
    finite = np.isfinite(v)
    if finite.sum() < 2:
        raise InvalidInput("need at least two finite values to rescale")
    lo, hi = v[finite].min(), v[finite].max()
    out = np.full(v.shape, np.nan)
    out[finite] = 0.0 if hi == lo else (v[finite] - lo) / (hi - lo)
    return out


def synthetic_swarm(n_agents=10, frames=400, change=200, alignment=0.6,
                    spread=5.0, speed=1.0, seed=0):
    """Swarm whose velocities start to share a common heading after ``change``.

    Before the change each agent's velocity is independent isotropic noise.
    From frame ``change + 1`` on, each velocity is ``alignment * m_t +
    sqrt(1 - alignment**2) * e_i`` with a heading ``m_t`` shared by the whole
    swarm, which puts a rank-2 spike into the velocity block of the
    features.  Positions scatter around a drifting centroid throughout, so
    the position block carries no change.  Frames are numbered from 1.
    """
    if not 0 <= alignment <= 1:
        raise InvalidInput("alignment must lie in [0, 1]")
    rng = make_rng(seed)
    centroid = np.zeros(2)
    out = []
    for t in range(1, frames + 1):
        noise = rng.standard_normal((n_agents, 2))
        heading = rng.standard_normal(2)
        if t > change:
            V = speed * (alignment * heading + math.sqrt(1 - alignment ** 2) * noise)
        else:
            V = speed * noise
        centroid = centroid + V.mean(axis=0)
        P = centroid + spread * rng.standard_normal((n_agents, 2))
        out.append(SwarmFrame(t, P, V))
    return out


# Default Subspace-CUSUM alarm level for swarm features, in units of the
# estimated noise variance.  Chosen on synthetic swarms without a change,
# where the statistic stayed below about 35 times the noise variance.
SWARM_THRESHOLD_FACTOR = 60.0
SWARM_DETECTORS = ("subspace-cusum", "eigchart", "hotelling", "glr")


def noise_level(features):
    """Mean squared feature value, used as the noise variance sigma2.

    Under ``rms`` normalization this is exactly 1/2 for any frame with
    moving agents, whatever the swarm does.
    """
    return float(np.mean(np.asarray(features, float) ** 2))


@dataclass
class SwarmRun:
    name: str
    statistics: np.ndarray   # aligned with frames; NaN during warm-up
    alarm_index: int | None  # 1-based position in the frame list
    threshold: float
    config: dict


def run_swarm_detectors(features, names, window=40, d=2, rho_min=0.5, drift=None,
                        thresholds=None):
    """Run the named detectors over a (frames, 4n) feature matrix.

    The noise variance is estimated by :func:`noise_level`; the
    Subspace-CUSUM drift follows from it and ``rho_min`` unless ``drift`` is
    given.  ``thresholds`` maps detector names to alarm levels; a missing
    Subspace-CUSUM level defaults to ``SWARM_THRESHOLD_FACTOR`` times the
    noise variance and other detectors default to no alarm.
    """
    from .calibrate import drift_delta
    from .detectors import EigenChartConfig, GLRConfig, HotellingConfig, SubspaceCusumConfig

    X = np.asarray(features, float)
    T, k = X.shape
    sigma2 = noise_level(X)
    if not sigma2 > 0:
        raise InvalidInput("all features are zero")
    thresholds = dict(thresholds or {})
    runs = []
    for name in names:
        b = thresholds.get(name)
        if name == "subspace-cusum":
            b = SWARM_THRESHOLD_FACTOR * sigma2 if b is None else b
            delta = drift_delta(d, sigma2, rho_min) if drift is None else drift
            config = SubspaceCusumConfig(k, d, window, delta, b, "lapack")
        elif name == "eigchart":
            config = EigenChartConfig(k, window, math.inf if b is None else b, "lapack")
        elif name == "hotelling":
            config = HotellingConfig(k, sigma2, math.inf if b is None else b)
        elif name == "glr":
            config = GLRConfig(k, d, sigma2, math.inf if b is None else b)
        else:
            raise InvalidInput(f"detector {name!r} is not available for swarm data; "
                               f"choose from {', '.join(SWARM_DETECTORS)}")
        report = config.build().run(X, stop_at_alarm=False)
        stats = np.full(T, np.nan)
        start = report.warmup_length
        stats[start:start + len(report.trajectory)] = report.trajectory
        runs.append(SwarmRun(name, stats, report.alarm_time, config.threshold, config.to_dict()))
    return sigma2, runs
