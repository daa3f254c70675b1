import numpy as np
import pytest

from augwalk.augment import build_augmented_tree
from augwalk.models import builtin_model
from augwalk.network import build_nrw
from augwalk.partition import build_ifs_tree

GAMMA = 0.25


@pytest.fixture(scope="session")
def interval_tree8():
    return build_ifs_tree(builtin_model("interval"), 8)


@pytest.fixture(scope="session")
def interval_aug8(interval_tree8):
    return build_augmented_tree(interval_tree8, gamma=GAMMA)


@pytest.fixture(scope="session")
def interval_net8(interval_aug8):
    return build_nrw(interval_aug8, 0.25)


@pytest.fixture(scope="session")
def rotated_third_tree8():
    return build_ifs_tree(builtin_model("rotated-interval", p=1 / 3), 8)


@pytest.fixture(scope="session")
def rotated_third_aug8(rotated_third_tree8):
    return build_augmented_tree(rotated_third_tree8, gamma=GAMMA)


@pytest.fixture(scope="session")
def gasket_tree8():
    return build_ifs_tree(builtin_model("gasket"), 8)


@pytest.fixture(scope="session")
def gasket_aug8(gasket_tree8):
    return build_augmented_tree(gasket_tree8, gamma=GAMMA)


@pytest.fixture(scope="session")
def gasket_net5(gasket_aug8):
    return build_nrw(gasket_aug8, 0.2)


@pytest.fixture(scope="session")
def interval_tree14():
    return build_ifs_tree(builtin_model("interval"), 14)


@pytest.fixture(scope="session")
def interval_aug14(interval_tree14):
    return build_augmented_tree(interval_tree14, gamma=GAMMA)


@pytest.fixture(scope="session")
def grid_cloud():
    """Uniform 1025-point grid on [0, 1] with equal masses."""
    from augwalk.models import ModelSpec

    pts = np.linspace(0.0, 1.0, 1025).reshape(-1, 1)
    return ModelSpec(kind="pointcloud", points=pts,
                     masses=np.full(len(pts), 1.0 / len(pts)), c_rho=1.0)
