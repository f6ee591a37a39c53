import numpy as np
import pytest

from caresim.geometry import Pose6
from caresim.kinematics import JointChain, Link


def make_planar_chain(l1: float = 0.5, l2: float = 0.4,
                      limits=(-np.pi, np.pi)) -> JointChain:
    """Two-link planar arm in the xy plane, both joints about +z.

    The elbow offset is along +x of the rotated shoulder frame, so the
    classic law-of-cosines solution applies directly.
    """
    shoulder = Link(offset=Pose6.identity(), axis=(0.0, 0.0, 1.0), limits=limits)
    elbow = Link(offset=Pose6(np.array([l1, 0.0, 0.0])), axis=(0.0, 0.0, 1.0), limits=limits)
    return JointChain(links=(shoulder, elbow),
                      ee_offset=Pose6(np.array([l2, 0.0, 0.0])))


@pytest.fixture
def planar_chain() -> JointChain:
    return make_planar_chain()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260814)
