import numpy as np
import pytest

from synthact.motion import MotionClip, catalog, chain, write_bvh
from synthact.motion import quat

TRIVIAL_TWO_JOINT = """HIERARCHY
ROOT hips
{
    OFFSET 0.500000 1.000000 2.000000
    CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
    JOINT spine
    {
        OFFSET 0.000000 0.300000 0.000000
        CHANNELS 3 Zrotation Xrotation Yrotation
    }
}
MOTION
Frames: 1
Frame Time: 0.033333
0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000
"""


def _order_fixture(order: str, angles=(30.0, 45.0, 60.0)) -> str:
    names = {"X": "Xrotation", "Y": "Yrotation", "Z": "Zrotation"}
    chans = " ".join(names[c] for c in order)
    vals = " ".join(f"{a:.6f}" for a in angles)
    return f"""HIERARCHY
ROOT base
{{
    OFFSET 0.000000 0.000000 0.000000
    CHANNELS 3 {chans}
    JOINT tip
    {{
        OFFSET 0.000000 1.000000 0.000000
        CHANNELS 3 {chans}
        End Site
        {{
            OFFSET 0.000000 0.200000 0.000000
        }}
    }}
}}
MOTION
Frames: 2
Frame Time: 0.040000
{vals} 0.000000 0.000000 0.000000
0.000000 0.000000 0.000000 {vals}
"""


TREE_WITH_END_SITES = """HIERARCHY
ROOT torso
{
    OFFSET 0.000000 0.900000 0.000000
    CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
    JOINT arm_l
    {
        OFFSET -0.200000 0.100000 0.000000
        CHANNELS 3 Xrotation Yrotation Zrotation
        End Site
        {
            OFFSET -0.250000 0.000000 0.000000
        }
    }
    JOINT arm_r
    {
        OFFSET 0.200000 0.100000 0.000000
        CHANNELS 3 Zrotation Yrotation Xrotation
        End Site
        {
            OFFSET 0.250000 0.000000 0.000000
        }
    }
    JOINT head
    {
        OFFSET 0.000000 0.300000 0.000000
        CHANNELS 3 Zrotation Xrotation Yrotation
        End Site
        {
            OFFSET 0.000000 0.150000 0.000000
        }
        End Site
        {
            OFFSET 0.050000 0.100000 0.000000
        }
    }
}
MOTION
Frames: 3
Frame Time: 0.033333
0.100000 0.900000 -0.050000 10.000000 -20.000000 5.000000 15.000000 0.000000 -30.000000 12.500000 45.000000 -7.250000 1.000000 2.000000 3.000000
0.000000 0.950000 0.000000 0.000000 0.000000 0.000000 90.000000 0.000000 0.000000 -90.000000 10.000000 0.000000 -15.000000 30.000000 60.000000
-0.100000 1.000000 0.050000 -10.000000 20.000000 -5.000000 -15.000000 179.000000 30.000000 0.000000 -45.000000 7.250000 0.000000 0.000000 0.000000
"""

ZERO_FRAMES = """HIERARCHY
ROOT solo
{
    OFFSET 0.000000 0.000000 0.000000
    CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
    JOINT next
    {
        OFFSET 1.000000 0.000000 0.000000
        CHANNELS 3 Zrotation Xrotation Yrotation
    }
}
MOTION
Frames: 0
Frame Time: 0.010000
"""


def _random_chain_text(seed: int, joints: int, frames: int) -> str:
    rng = np.random.default_rng(seed)
    topo = chain(joints, spacing=0.2)
    rot = quat.normalize(rng.normal(size=(frames, joints, 4)))
    root = rng.uniform(-1, 1, size=(frames, 3))
    return write_bvh(MotionClip(topo, rot, root, 1 / 60))


def build_bvh_corpus() -> list[tuple[str, str]]:
    """Named fixture files covering channel orders, end sites, and trees."""
    corpus = [
        ("two_joint_trivial", TRIVIAL_TWO_JOINT),
        ("tree_end_sites", TREE_WITH_END_SITES),
        ("zero_frames", ZERO_FRAMES),
        ("chain_random_a", _random_chain_text(101, 6, 4)),
        ("chain_random_b", _random_chain_text(202, 11, 3)),
    ]
    for order in ("XYZ", "XZY", "YXZ", "YZX", "ZXY", "ZYX"):
        corpus.append((f"order_{order}", _order_fixture(order)))
    for action, variant in (("wave", 0), ("squat", 1), ("spin", 2), ("march", 3)):
        text = write_bvh(catalog.builtin_clip(action, variant))
        corpus.append((f"catalog_{action}{variant}", text))
    return corpus


@pytest.fixture(scope="session")
def bvh_corpus():
    return build_bvh_corpus()
