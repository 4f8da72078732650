import numpy as np
import pytest

from lcqp2d.contact import Body, ContactCandidate, World
from lcqp2d.geometry import BoxShape, DiskShape, HalfPlaneShape, Pose2


@pytest.fixture
def resting_box_world():
    """A 0.2 x 0.1 box resting on the ground, plus a finger to its left."""
    ground = Body("ground", HalfPlaneShape((0, 1), 0.0), Pose2(0, 0, 0), kind="static")
    box = Body("box", BoxShape(0.2, 0.1), Pose2(0.0, 0.05, 0.0), kind="free", mass=0.2)
    grip = Body("grip", BoxShape(0.02, 0.1), Pose2(-0.13, 0.05, 0.0), kind="actuated")
    cands = [ContactCandidate(i, box, ground, ground.shape.surface(), c, mu=0.5)
             for i, c in enumerate(box.shape.corners())]
    cands.append(ContactCandidate(4, grip, box, box.shape.face("-x"),
                                  np.array([0.01, 0.0]), mu=0.5))
    return World([ground, box, grip], cands)


@pytest.fixture
def mixed_world():
    """Bodies of every kind for jacobian sweeps: box, disk, wall, gripper."""
    ground = Body("ground", HalfPlaneShape((0, 1), 0.0), Pose2(0, 0, 0), kind="static")
    wall = Body("wall", HalfPlaneShape((-1, 0), -0.3), Pose2(0, 0, 0), kind="static")
    box = Body("box", BoxShape(0.1, 0.2), Pose2(0.17, 0.05, np.pi / 2),
               kind="free", mass=1.0)
    grip = Body("grip", BoxShape(0.02, 0.3), Pose2(0.05, 0.2, 0.0), kind="actuated")
    disk = Body("disk", DiskShape(0.05), Pose2(0.5, 0.06, 0.3), kind="free", mass=0.5)
    cands = []
    i = 0
    for c in box.shape.corners():
        cands.append(ContactCandidate(i, box, ground, ground.shape.surface(), c, mu=0.5))
        i += 1
        cands.append(ContactCandidate(i, box, wall, wall.shape.surface(), c, mu=0.3))
        i += 1
    cands.append(ContactCandidate(i, grip, box, box.shape.face("+y"),
                                  np.array([0.0, -0.15]), mu=0.8))
    i += 1
    cands.append(ContactCandidate(i, disk, ground, ground.shape.surface(), None, mu=0.4))
    return World([ground, wall, box, grip, disk], cands)
