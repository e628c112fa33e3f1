"""teleosim: simulator-backed Internet teleoperation platform.

A client-server mobile-robot stack with multi-protocol data channels,
periodic sensor telemetry, calibrated network impairment, fuzzy-logic
safety autonomy and an operator console gateway. Everything runs on a
deterministic virtual clock for tests and headless experiments, or on
real sockets in live mode.
"""

__version__ = "0.1.0"

from .geometry import Polygon, Pose2D, Twist, Wall, WorldModel
from .wire import ChannelClass, CommandKind, CommandMessage, TelemetryFrame

__all__ = [
    "ChannelClass",
    "CommandKind",
    "CommandMessage",
    "Polygon",
    "Pose2D",
    "TelemetryFrame",
    "Twist",
    "Wall",
    "WorldModel",
    "__version__",
]
