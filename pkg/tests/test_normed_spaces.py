import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dyadic_embed.normed_spaces import (
    AmbientSpace,
    BlockNotFoundError,
    BlockSpec,
    BlockVector,
    InstanceError,
    PointCloud,
    block_embed,
    block_extract,
    block_project,
    norm,
    projection_norm_bound,
)

EXPONENTS = [1.0, 1.5, 2.0, 3.0, math.inf]
finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize("v, p, expected", [
    ([1, -2, 3], 1, 6.0),
    ([3, 4], 2, 5.0),
    ([1, -2, 3], math.inf, 3.0),
])
def test_norm_examples(v, p, expected):
    assert norm(np.array(v, float), p) == expected


@pytest.mark.parametrize("p", EXPONENTS)
@given(x=arrays(float, 5, elements=finite), y=arrays(float, 5, elements=finite),
       c=st.floats(-100, 100, allow_nan=False))
@settings(max_examples=50, deadline=None)
def test_norm_axioms(p, x, y, c):
    nx, ny = norm(x, p), norm(y, p)
    assert norm(x + y, p) <= (nx + ny) * (1 + 1e-9) + 1e-12
    assert norm(c * x, p) == pytest.approx(abs(c) * nx, rel=1e-9, abs=1e-300)
    assert (nx == 0) == (not np.any(x))


def test_block_norm_uses_layout_exponent():
    spec = BlockSpec.from_dims([(0, 1, 2), (0, 2, 2)], q=1)
    v = BlockVector(np.array([1.0, 2.0, 3.0, 4.0]), spec)
    assert norm(v) == 10.0


@pytest.fixture
def two_blocks():
    spec = BlockSpec.from_dims([(0, 1, 2), (0, 2, 2)], q=2)
    return spec, BlockVector(np.array([1.0, 2.0, 3.0, 4.0]), spec)


def test_block_project_examples(two_blocks):
    spec, v = two_blocks
    np.testing.assert_array_equal(block_project(v, 1).coords, [1, 2, 0, 0])
    np.testing.assert_array_equal(block_project(v, 2).coords, v.coords)
    low = block_project(v, 1)
    np.testing.assert_array_equal(block_project(low, 1).coords, low.coords)


def test_block_extract_examples(two_blocks):
    spec, v = two_blocks
    np.testing.assert_array_equal(block_extract(v, 0, 2), [3, 4])
    np.testing.assert_array_equal(block_extract(spec.zeros(), 0, 2), [0, 0])
    with pytest.raises(BlockNotFoundError):
        block_extract(v, 5, 1)


def _random_spec(draw_dims):
    dims = [(k, n, d) for (k, n), d in draw_dims.items()]
    dims.sort(key=lambda t: (t[1], t[0]))
    return BlockSpec.from_dims(dims, q=2)


block_layouts = st.dictionaries(
    st.tuples(st.integers(-3, 3), st.integers(1, 5)), st.integers(1, 3), min_size=1, max_size=8
)


@given(layout=block_layouts, data=st.data())
@settings(max_examples=60, deadline=None)
def test_projection_properties(layout, data):
    spec = _random_spec(layout)
    coords = data.draw(arrays(float, spec.total_dim, elements=finite))
    v = BlockVector(coords, spec)
    n = data.draw(st.integers(0, 6))
    pv = block_project(v, n)
    np.testing.assert_array_equal(block_project(pv, n).coords, pv.coords)
    assert norm(pv) <= norm(v) * (1 + 1e-12)
    rebuilt = spec.zeros()
    for b in spec.blocks:
        rebuilt = rebuilt + block_embed(spec, b.shell, b.level, block_extract(v, b.shell, b.level))
    np.testing.assert_array_equal(rebuilt.coords, v.coords)


@given(layout=block_layouts, n=st.integers(0, 6))
@settings(max_examples=30, deadline=None)
def test_projection_norm_bound_matches_sampling(layout, n):
    spec = _random_spec(layout)
    bound = projection_norm_bound(spec, n)
    assert bound == (1.0 if any(b.level <= n for b in spec.blocks) else 0.0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        v = BlockVector(rng.standard_normal(spec.total_dim), spec)
        assert norm(block_project(v, n)) <= bound * norm(v) + 1e-12


def test_projection_norm_bound_examples():
    spec = BlockSpec.from_dims([(0, 1, 3)], q=2)
    assert projection_norm_bound(spec, 1) == 1.0
    assert projection_norm_bound(spec, 0) == 0.0


def test_block_spec_rejects_bad_layouts():
    from dyadic_embed.normed_spaces import Block
    with pytest.raises(ValueError):
        BlockSpec((Block(0, 1, 2, 0), Block(0, 2, 2, 3)), 2)
    with pytest.raises(ValueError):
        BlockSpec((Block(0, 1, 2, 0), Block(0, 1, 2, 2)), 2)


def test_point_cloud_roundtrip(tmp_path):
    M = PointCloud(np.array([[0.0, 0.0], [1.0, 2.0]]), AmbientSpace("inf", 2))
    path = tmp_path / "m.json"
    M.save(path)
    obj = json.loads(path.read_text())
    assert set(obj) == {"p", "dim", "points"}
    assert obj["p"] == "inf"
    back = PointCloud.load(path)
    np.testing.assert_array_equal(back.points, M.points)
    assert math.isinf(back.p) and back.contains_origin


def test_point_cloud_rejects_duplicates_and_bad_input():
    with pytest.raises(InstanceError, match="duplicate"):
        PointCloud(np.array([[1.0], [1.0]]), AmbientSpace(2, 1))
    with pytest.raises(InstanceError):
        PointCloud(np.array([[1.0, np.nan]]), AmbientSpace(2, 2))
    with pytest.raises(InstanceError):
        PointCloud.from_json({"p": 2, "dim": 2, "points": [[1, 2], [3]]})
    with pytest.raises(InstanceError):
        PointCloud.from_json({"dim": 2, "points": [[1, 2]]})
    with pytest.raises(ValueError):
        AmbientSpace(0.5, 2)
