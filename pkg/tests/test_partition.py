import numpy as np
import pytest

from augwalk.models import ModelSpec, Similitude, builtin_model
from augwalk.partition import (
    IndexTree,
    build_ifs_tree,
    build_net_tree,
    net_parameters_valid,
    verify_partition,
)


def test_interval_levels_and_measures():
    tree = build_ifs_tree(builtin_model("interval"), 2)
    assert len(tree.level_ids(1)) == 2
    assert len(tree.level_ids(2)) == 4
    assert tree.measure[tree.level_ids(2)] == pytest.approx([0.25] * 4)


def test_rotated_interval_word_measure():
    tree = build_ifs_tree(builtin_model("rotated-interval", p=1 / 3), 2)
    v = tree.vertex_by_word("12")
    assert tree.measure[v] == pytest.approx((1 / 3) * (2 / 3))


def test_gasket_level_sizes_uniform_measure():
    tree = build_ifs_tree(builtin_model("gasket"), 3)
    assert len(tree.level_ids(3)) == 27
    assert tree.measure[tree.level_ids(3)] == pytest.approx([1 / 27] * 27)


def test_ifs_rejects_bad_level():
    with pytest.raises(ValueError):
        build_ifs_tree(builtin_model("interval"), 0)


def test_child_measures_sum_exactly(rotated_third_tree8):
    tree = rotated_third_tree8
    for v in range(tree.level_end(tree.max_level - 1)):
        kids = tree.children[v]
        assert tree.measure[kids].sum() == pytest.approx(tree.measure[v], abs=1e-15)


def test_cell_diameter_bound(interval_tree8):
    # sampled diameters never exceed the word-ratio bound r0^(|x|)
    tree = interval_tree8
    for v in tree.level_ids(5):
        s = tree.samples[v]
        diam = np.abs(s[:, None, :] - s[None, :, :]).max()
        assert diam <= tree.r0 ** 5 + 1e-12


def test_deterministic_construction():
    a = build_ifs_tree(builtin_model("gasket"), 4)
    b = build_ifs_tree(builtin_model("gasket"), 4)
    assert a.words == b.words
    assert np.array_equal(a.parent, b.parent)
    assert np.array_equal(a.rep, b.rep)


def test_nonuniform_ratio_levels():
    # maps with different ratios produce ratio-band levels, not word-length levels
    maps_spec = ModelSpec(
        kind="ifs",
        maps=[
            builtin_model("interval").maps[0],          # ratio 1/2
            Similitude(0.25, np.eye(1), np.array([0.75])),  # x -> x/4 + 3/4
        ],
        weights=[0.5, 0.5],
    )
    tree = build_ifs_tree(maps_spec, 2)
    words = {tree.word_string(v) for v in tree.level_ids(1)}
    # r0 = 1/4; level 1 holds "2" (r=1/4) plus both children of "1"
    assert words == {"2", "11", "12"}
    assert tree.measure[tree.level_ids(1)].sum() == pytest.approx(1.0)


def test_verify_partition_clean(interval_tree8):
    report = verify_partition(interval_tree8)
    assert report.ok
    assert report.child_sum_defect == 0.0
    assert report.max_radius_ratio <= 1.0


def test_verify_partition_flags_corruption(interval_tree8):
    import copy

    tree = copy.copy(interval_tree8)
    tree.measure = interval_tree8.measure.copy()
    tree.measure[tree.level_ids(3)[0]] += 1e-3
    report = verify_partition(tree)
    assert not report.ok
    assert any("sum" in f for f in report.flags)


def test_descend_chains(interval_tree8):
    tree = interval_tree8
    chain = tree.descend([0.0], 3)
    assert [tree.word_string(v) for v in chain] == ["", "1", "11", "111"]
    chain = tree.descend([1.0], 3)
    assert [tree.word_string(v) for v in chain] == ["", "2", "22", "222"]


def test_json_round_trip(tmp_path, interval_tree8):
    path = tmp_path / "tree.json"
    interval_tree8.save(path)
    loaded = IndexTree.load(path)
    assert loaded.num_vertices == interval_tree8.num_vertices
    assert np.array_equal(loaded.parent, interval_tree8.parent)
    assert loaded.measure == pytest.approx(interval_tree8.measure)
    assert loaded.vertex_by_word("12") == interval_tree8.vertex_by_word("12")


# -- point clouds ----------------------------------------------------------------


def test_three_point_cloud_single_level():
    spec = ModelSpec(
        kind="pointcloud",
        points=[[0.0], [0.45], [1.0]],
        masses=[1 / 3, 1 / 3, 1 / 3],
    )
    tree = build_net_tree(spec, r0=0.05, b=0.05, max_level=1)
    ids = tree.level_ids(1)
    assert len(ids) == 3
    assert tree.measure[ids] == pytest.approx([1 / 3] * 3)


def test_net_parameter_constraint():
    assert net_parameters_valid(1.0, 0.125, 0.05)
    assert not net_parameters_valid(1.0, 0.45, 0.05)
    spec = ModelSpec(kind="pointcloud", points=[[0.0], [1.0]])
    with pytest.raises(ValueError):
        build_net_tree(spec, r0=0.45, b=0.05, max_level=1)


def test_grid_masses_partition(grid_cloud):
    tree = build_net_tree(grid_cloud, r0=0.125, b=0.05, max_level=2)
    for m in (1, 2):
        assert tree.measure[tree.level_ids(m)].sum() == pytest.approx(1.0, abs=1e-12)
    report = verify_partition(tree)
    assert report.child_sum_defect <= 1e-12


def test_grid_cells_rep_radius(grid_cloud):
    # oracle: exhaustive scan of the assignment distances
    tree = build_net_tree(grid_cloud, r0=0.125, b=0.05, max_level=2)
    worst = 0.0
    for v in tree.level_ids(2):
        assert tree.measure[v] > 0
        gap = np.abs(tree.samples[v] - tree.rep[v][None, :]).max()
        worst = max(worst, gap / tree.r0**2)
    # every assigned point lies within c * r0^2 of the net point
    assert worst <= 2.0


def test_grid_assignment_nested(grid_cloud):
    tree = build_net_tree(grid_cloud, r0=0.125, b=0.05, max_level=2)
    # each level-2 cell's points are a subset of its parent's points
    for v in tree.level_ids(2):
        parent = tree.parent[v]
        child_pts = {float(p[0]) for p in tree.samples[v]}
        parent_pts = {float(p[0]) for p in tree.samples[parent]}
        assert child_pts <= parent_pts
