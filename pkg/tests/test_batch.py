import math

import numpy as np
import pytest

from subcusum.batch import FirstPassageRunner
from subcusum.calibrate import null_scenario
from subcusum.detectors import (EigenChartConfig, ExactCusumConfig, GLRConfig, HotellingConfig,
                                SubspaceCusumConfig, with_threshold)
from subcusum.model import SeededStream, scenario_library

SCEN = scenario_library("rankd-uniform", 4, 2, lam=1.0, tau=25)


def configs():
    return [
        ExactCusumConfig.from_model(SCEN.post),
        SubspaceCusumConfig(4, 2, 10, 2.5, solver="lapack"),
        EigenChartConfig(4, 10, solver="lapack"),
        HotellingConfig(4, 1.0),
        GLRConfig(4, 2, 1.0, max_window=30, stride=5),
    ]


def thresholds(kind):
    return {"exact-cusum": 6.0, "subspace-cusum": 12.0, "eigchart": 2.2,
            "hotelling": 14.0, "glr": 9.0}[kind]


def single_stream_alarm(config, b, replicate, seed, cap):
    det = with_threshold(config, b).build()
    stream = SeededStream(SCEN, seed, replicate)
    for t in range(1, cap + 1):
        det.step(stream.take(1)[0])
        if det.stopped:
            return det.alarm_time
    return cap


@pytest.mark.parametrize("config", configs(), ids=lambda c: c.kind)
def test_batched_alarms_match_single_detectors(config):
    b, cap, seed = thresholds(config.kind), 400, 13
    runner = FirstPassageRunner(config, SCEN, seed, 12, cap=cap, chunk_size=5)
    times, capped = runner.alarm_times(b)
    expected = [single_stream_alarm(config, b, r, seed, cap) for r in range(12)]
    np.testing.assert_array_equal(times, expected)
    np.testing.assert_array_equal(capped, np.array(expected) == cap)


def test_lower_thresholds_reuse_recorded_paths():
    cfg = SubspaceCusumConfig(4, 2, 10, 2.5, solver="lapack")
    runner = FirstPassageRunner(cfg, SCEN, 3, 20, cap=2000)
    high, _ = runner.alarm_times(20.0)
    low, _ = runner.alarm_times(8.0)
    fresh, _ = FirstPassageRunner(cfg, SCEN, 3, 20, cap=2000).alarm_times(8.0)
    np.testing.assert_array_equal(low, fresh)
    assert np.all(low <= high)


def test_results_independent_of_chunking_threads_and_extension():
    cfg = SubspaceCusumConfig(4, 2, 10, 2.5, solver="lapack")
    null = null_scenario(cfg)
    base, _ = FirstPassageRunner(cfg, null, 5, 30, cap=3000).alarm_times(9.0)
    chunked, _ = FirstPassageRunner(cfg, null, 5, 30, cap=3000, chunk_size=7,
                                    n_jobs=3).alarm_times(9.0)
    grown = FirstPassageRunner(cfg, null, 5, 10, cap=3000)
    grown.alarm_times(9.0)
    grown.extend(20)
    extended, _ = grown.alarm_times(9.0)
    np.testing.assert_array_equal(base, chunked)
    np.testing.assert_array_equal(base, extended)
    assert base.tobytes() == chunked.tobytes()


def test_cap_is_reported():
    cfg = HotellingConfig(4, 1.0)
    runner = FirstPassageRunner(cfg, null_scenario(cfg), 0, 5, cap=50)
    times, capped = runner.alarm_times(math.inf)
    assert capped.all()
    np.testing.assert_array_equal(times, 50)


@pytest.mark.parametrize("target", [20.0, 200.0, 2000.0])
def test_reaches_agrees_with_exact_mean(target):
    cfg = SubspaceCusumConfig(4, 2, 10, 2.5, solver="lapack")
    for b in (3.0, 8.0, 14.0):
        r1 = FirstPassageRunner(cfg, null_scenario(cfg), 1, 40, cap=20_000)
        decision, bound = r1.reaches(b, target)
        times, _ = FirstPassageRunner(cfg, null_scenario(cfg), 1, 40, cap=20_000).alarm_times(b)
        assert decision == (times.mean() >= target)
        assert bound <= times.mean() + 1e-9
