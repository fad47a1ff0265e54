"""Replicate-vectorized detectors and the first-passage engine behind the
Monte-Carlo calibration routines.

Each replicate r draws its observations from its own stream seeded with
``derive_seed(seed, r)``, so a replicate's path does not depend on how
replicates are batched, chunked or scheduled.  While running, the engine
records every time a replicate's statistic exceeds its running maximum
("ladder points").  The alarm time for any threshold b up to the level
already reached is then the time of the first ladder point >= b, which
makes threshold searches exact under common random numbers.
"""

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .detectors import (EigenChartConfig, ExactCusumConfig, GLRConfig, HotellingConfig,
                        SubspaceCusumConfig)
from .model import SeededStream


class _BatchExactCusum:
    def __init__(self, cfg, n):
        rho = np.asarray(cfg.rho)
        self.basis = cfg.basis
        self.weights = rho / (1.0 + rho)
        self.offset = cfg.sigma2 * float(np.sum(np.log1p(rho)))
        self.running = np.zeros(n)

    def step(self, idx, X):
        proj = X @ self.basis
        inc = (proj * proj) @ self.weights - self.offset
        stat = np.maximum(self.running[idx], 0.0) + inc
        self.running[idx] = stat
        return stat


class _BatchWindow:
    def __init__(self, k, size, refresh, n):
        self.buf = np.zeros((n, size, k))
        self.scatter = np.zeros((n, k, k))
        self.count = np.zeros(n, dtype=np.int64)
        self.size, self.refresh = size, refresh

    def push(self, idx, X):
        count = self.count[idx]
        slot = count % self.size
        full = count >= self.size
        old = self.buf[idx, slot]
        old[~full] = 0.0
        self.buf[idx, slot] = X
        self.count[idx] = count + 1
        self.scatter[idx] += X[:, :, None] * X[:, None, :] - old[:, :, None] * old[:, None, :]
        redo = idx[(count + 1) % self.refresh == 0]
        if redo.size:
            B = self.buf[redo]
            self.scatter[redo] = np.einsum("nsk,nsl->nkl", B, B)


class _BatchSubspaceCusum:
    def __init__(self, cfg, n):
        self.d, self.w, self.drift = cfg.d, cfg.w, cfg.drift
        self.window = _BatchWindow(cfg.k, cfg.w + 1, cfg.w, n)
        self.running = np.zeros(n)

    def step(self, idx, X):
        win = self.window
        win.push(idx, X)
        count = win.count[idx]
        stat = np.full(idx.size, np.nan)
        ready = count > self.w
        if not ready.any():
            return stat
        rid = idx[ready]
        scored = win.buf[rid, (count[ready] - 1 - self.w) % win.size]
        cov = (win.scatter[rid] - scored[:, :, None] * scored[:, None, :]) / self.w
        _, vecs = np.linalg.eigh(cov)
        proj = np.einsum("nkd,nk->nd", vecs[:, :, -self.d:], scored)
        z = np.sum(proj * proj, axis=1)
        s = np.maximum(self.running[rid], 0.0) + z - self.drift
        self.running[rid] = s
        stat[ready] = s
        return stat


class _BatchEigenChart:
    def __init__(self, cfg, n):
        self.w = cfg.w
        self.window = _BatchWindow(cfg.k, cfg.w, cfg.w, n)

    def step(self, idx, X):
        win = self.window
        win.push(idx, X)
        ready = win.count[idx] >= self.w
        stat = np.full(idx.size, np.nan)
        if ready.any():
            stat[ready] = np.linalg.eigvalsh(win.scatter[idx[ready]] / self.w)[:, -1]
        return stat


class _BatchHotelling:
    def __init__(self, cfg, n):
        self.sigma2 = cfg.sigma2

    def step(self, idx, X):
        return np.sum(X * X, axis=1) / self.sigma2


class _PerReplicate:
    """Fallback for detectors without a vectorized form."""

    def __init__(self, cfg, n):
        self.dets = [cfg.build() for _ in range(n)]

    def step(self, idx, X):
        out = np.empty(idx.size)
        for j, (i, x) in enumerate(zip(idx, X)):
            s = self.dets[i].step(x)
            out[j] = np.nan if s is None else s
        return out


_BATCHED = {
    ExactCusumConfig: _BatchExactCusum,
    SubspaceCusumConfig: _BatchSubspaceCusum,
    EigenChartConfig: _BatchEigenChart,
    HotellingConfig: _BatchHotelling,
    GLRConfig: _PerReplicate,
}


def make_batch(config, n):
    return _BATCHED[type(config)](config, n)


class _Chunk:
    """A fixed set of replicates advanced in lock-step."""

    def __init__(self, config, scenario, seed, replicates, cap, block):
        self.replicates = np.asarray(replicates, dtype=np.int64)
        n = self.replicates.size
        self.streams = [SeededStream(scenario, seed, int(r), block=block) for r in self.replicates]
        self.state = make_batch(config, n)
        self.block = block
        self.data = np.zeros((n, block, scenario.k))
        self.pos = np.full(n, block)
        self.t = np.zeros(n, dtype=np.int64)
        self.best = np.full(n, -np.inf)
        self.cap = cap
        self._rec = []

    def advance(self, level, limit=None):
        """Run replicates until their statistic reaches ``level``, they hit
        the cap, or (if given) their clock reaches ``limit``."""
        stop = self.cap if limit is None else min(self.cap, int(limit))
        idx = np.flatnonzero((self.best < level) & (self.t < stop))
        while idx.size:
            empty = idx[self.pos[idx] == self.block]
            for i in empty:
                self.data[i] = self.streams[i].take(self.block)
                self.pos[i] = 0
            X = self.data[idx, self.pos[idx]]
            self.pos[idx] += 1
            self.t[idx] += 1
            stat = self.state.step(idx, X)
            new = stat > self.best[idx]
            if new.any():
                hit = idx[new]
                self.best[hit] = stat[new]
                self._rec.append((hit, self.t[hit], stat[new]))
            keep = (self.best[idx] < level) & (self.t[idx] < stop)
            idx = idx[keep]

    def ladders(self):
        """Per-replicate (times, values) of running-maximum records."""
        n = self.replicates.size
        if not self._rec:
            return [(np.zeros(0, np.int64), np.zeros(0))] * n
        who = np.concatenate([r[0] for r in self._rec])
        when = np.concatenate([r[1] for r in self._rec])
        what = np.concatenate([r[2] for r in self._rec])
        order = np.argsort(who, kind="stable")
        who, when, what = who[order], when[order], what[order]
        cuts = np.searchsorted(who, np.arange(n + 1))
        return [(when[a:b], what[a:b]) for a, b in zip(cuts[:-1], cuts[1:])]


class FirstPassageRunner:
    """Run-length engine for one detector configuration and scenario.

    ``alarm_times(b)`` returns the first time each replicate's statistic
    reaches ``b`` (the cap for replicates that never do) together with a
    cap-hit mask.  Replicates can be added later with ``extend``.
    """

    def __init__(self, config, scenario, seed, n, cap=250_000, n_jobs=1,
                 chunk_size=512, block=256):
        self.config, self.scenario, self.seed = config, scenario, seed
        self.cap = int(cap)
        self.n_jobs = max(1, int(n_jobs))
        self.chunk_size, self.block = int(chunk_size), int(block)
        self.chunks = []
        self.level = -math.inf
        self._ladders = None
        self.extend(n)

    @property
    def n(self):
        return sum(c.replicates.size for c in self.chunks)

    def extend(self, n_more):
        start = self.n
        ids = np.arange(start, start + int(n_more))
        for lo in range(0, ids.size, self.chunk_size):
            self.chunks.append(_Chunk(self.config, self.scenario, self.seed,
                                      ids[lo:lo + self.chunk_size], self.cap, self.block))
        self._ladders = None
        if self.level > -math.inf:
            self._advance(self.chunks, self.level)

    def _advance(self, chunks, level, limit=None):
        if self.n_jobs == 1 or len(chunks) == 1:
            for c in chunks:
                c.advance(level, limit)
        else:
            with ThreadPoolExecutor(self.n_jobs) as pool:
                list(pool.map(lambda c: c.advance(level, limit), chunks))
        self._ladders = None

    def advance(self, level):
        if level > self.level:
            self._advance(self.chunks, level)
            self.level = level

    def ladders(self):
        if self._ladders is None:
            self._ladders = [lad for c in self.chunks for lad in c.ladders()]
        return self._ladders

    def reaches(self, b, target):
        """Decide whether the mean alarm time at threshold ``b`` is at least
        ``target``, simulating as little as possible.

        Replicates run under a time limit that doubles until either the
        mean of the truncated alarm times already reaches ``target`` (the
        true mean can only be larger) or every replicate has alarmed or hit
        the cap (the mean is then exact).  Returns (decision, mean), where
        the mean is a lower bound when the decision is True.
        """
        limit = min(self.cap, max(2 * int(math.ceil(target)), 1))
        while True:
            if b > self.level:
                self._advance(self.chunks, b, limit)
            times, pending = self._partial_times(b)
            mean = float(times.mean())
            if mean >= target:
                return True, mean
            if not pending.any() or limit >= self.cap:
                return False, mean
            limit = min(self.cap, 2 * limit)

    def _partial_times(self, b):
        clocks = np.concatenate([c.t for c in self.chunks])
        times = clocks.copy()
        pending = np.ones(times.size, dtype=bool)
        for i, (when, what) in enumerate(self.ladders()):
            j = np.searchsorted(what, b, side="left")
            if j < what.size:
                times[i] = when[j]
                pending[i] = False
        pending &= clocks < self.cap
        return times, pending

    def alarm_times(self, b, n=None):
        self.advance(b)
        ladders = self.ladders()[:n]
        times = np.empty(len(ladders), dtype=np.int64)
        capped = np.zeros(len(ladders), dtype=bool)
        for i, (when, what) in enumerate(ladders):
            j = np.searchsorted(what, b, side="left")
            if j < what.size:
                times[i] = when[j]
            else:
                times[i] = self.cap
                capped[i] = True
        return times, capped
