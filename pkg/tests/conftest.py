import numpy as np
import pytest

from teleosim.geometry import Polygon, Pose2D, WorldModel


@pytest.fixture
def open_world():
    return WorldModel(bounds=(-100.0, -100.0, 100.0, 100.0))


@pytest.fixture
def box_world():
    # 20x20 room centered at origin with one square pillar
    return WorldModel(
        bounds=(-10.0, -10.0, 10.0, 10.0),
        obstacles=(Polygon(((3.0, -1.0), (5.0, -1.0), (5.0, 1.0), (3.0, 1.0))),),
        safe_point=Pose2D(-5.0, -5.0, 0.0),
        start=Pose2D(0.0, 0.0, 0.0),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
