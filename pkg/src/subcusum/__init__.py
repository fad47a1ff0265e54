"""Online detection of an emerging low-rank covariance spike.

The main entry points are the detectors in :mod:`subcusum.detectors`, the
Monte-Carlo calibration tools in :mod:`subcusum.calibrate` and the
command-line interface in :mod:`subcusum.cli`.
"""

__version__ = "0.1.0"

from .detectors import (EigenvalueShewhart, ExactCusum, Hotelling, SubspaceCusum, WindowGLR,
                        kl_drifts)
from .errors import SubcusumError
from .model import ChangeScenario, SpikedCovariance, scenario_library

__all__ = [
    "ChangeScenario", "EigenvalueShewhart", "ExactCusum", "Hotelling", "SpikedCovariance",
    "SubcusumError", "SubspaceCusum", "WindowGLR", "kl_drifts", "scenario_library",
]
