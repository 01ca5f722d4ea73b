"""Simulation and estimation toolkit for RIS-assisted MISO localization."""

from .channel import AngleSet, Scene, build_channels, total_channel
from .geometry import Position2, Position3, ScenarioGeometry, trilaterate
from .localizer import EstimatorKnowledge, LocalizationResult, localize
from .simulate import MeasurementSimulator

__all__ = [
    "AngleSet",
    "EstimatorKnowledge",
    "LocalizationResult",
    "MeasurementSimulator",
    "Position2",
    "Position3",
    "ScenarioGeometry",
    "Scene",
    "build_channels",
    "localize",
    "total_channel",
    "trilaterate",
]

__version__ = "0.1.0"
