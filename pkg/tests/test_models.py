import json
import math

import numpy as np
import pytest

from augwalk.models import ModelSpec, Similitude, builtin_model, resolve_model


def test_similitude_rejects_bad_ratio():
    with pytest.raises(ValueError):
        Similitude(1.2, np.eye(1), np.zeros(1))
    with pytest.raises(ValueError):
        Similitude(0.5, np.array([[2.0]]), np.zeros(1))  # not orthogonal


def test_similitude_fixed_point():
    s = Similitude(0.5, np.array([[-1.0]]), np.array([1.0]))  # x -> 1 - x/2
    assert s.fixed_point() == pytest.approx([2.0 / 3.0])


def test_ifs_weight_validation():
    maps = builtin_model("interval").maps
    with pytest.raises(ValueError):
        ModelSpec(kind="ifs", maps=maps, weights=[0.6, 0.6])
    with pytest.raises(ValueError):
        ModelSpec(kind="ifs", maps=[maps[0]], weights=[1.0])


def test_pointcloud_validation():
    with pytest.raises(ValueError):
        ModelSpec(kind="pointcloud", points=np.empty((0, 1)))
    with pytest.raises(ValueError):
        ModelSpec(kind="pointcloud", points=[[0.0], [1.0]],
                  masses=[0.7, 0.7])
    with pytest.raises(ValueError):
        ModelSpec(kind="pointcloud", points=[[0.0], [1.0]], c_rho=0.5)


def test_builtin_interval():
    spec = builtin_model("interval")
    assert spec.r0 == 0.5
    assert [s(np.array([[0.0], [1.0]])).ravel().tolist() for s in spec.maps] == [
        [0.0, 0.5],
        [0.5, 1.0],
    ]


def test_builtin_rotated_interval_reverses_orientation():
    spec = builtin_model("rotated-interval", p=1 / 3)
    img = spec.maps[1](np.array([[0.0], [1.0]]))
    assert img.ravel() == pytest.approx([1.0, 0.5])
    assert spec.weights == pytest.approx([1 / 3, 2 / 3])


def test_builtin_gasket_geometry():
    spec = builtin_model("gasket")
    fx = spec.fixed_points()
    assert fx == pytest.approx(spec.boundary_points)
    d01 = np.linalg.norm(fx[0] - fx[1])
    d02 = np.linalg.norm(fx[0] - fx[2])
    assert d01 == pytest.approx(1.0) and d02 == pytest.approx(1.0)


@pytest.mark.parametrize(
    "p, r0, expected",
    [
        (0.5, 0.5, 1.0),
        (1 / 3, 0.5, math.log(3) / math.log(2)),
    ],
)
def test_upper_dimension(p, r0, expected):
    spec = builtin_model("rotated-interval", p=p)
    assert spec.upper_dimension() == pytest.approx(expected)


def test_upper_dimension_gasket_equals_hausdorff_dimension():
    spec = builtin_model("gasket")
    assert spec.upper_dimension() == pytest.approx(math.log(3) / math.log(2))


def test_json_round_trip(tmp_path):
    spec = builtin_model("rotated-interval", p=0.4)
    path = tmp_path / "model.json"
    spec.save(path)
    loaded = resolve_model(str(path))
    assert loaded.kind == "ifs"
    assert loaded.weights == pytest.approx(spec.weights)
    assert loaded.maps[1].matrix == pytest.approx(spec.maps[1].matrix)
    raw = json.loads(path.read_text())
    assert raw["kind"] == "ifs"


def test_resolve_builtin_with_parameter():
    spec = resolve_model("builtin:rotated-interval:p=0.25")
    assert spec.weights == pytest.approx([0.25, 0.75])
    with pytest.raises(ValueError):
        resolve_model("builtin:unknown-model")
