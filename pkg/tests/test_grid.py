import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from halfkdv.grid import (
    Field, Side, derivative, diff_values, make_grid, norm, norm_split, points_for_spacing,
    read_field, trapezoid, write_field,
)


def test_side_parse_aliases():
    assert Side.parse("right") is Side.RIGHT
    assert Side.parse(Side.LEFT) is Side.LEFT
    with pytest.raises(ValueError):
        Side.parse("up")


@pytest.mark.parametrize("side,lo,hi", [("right", 0, 10), ("left", -10, 0), ("full", -10, 10)])
def test_grid_endpoints(side, lo, hi):
    g = make_grid(side, 10.0, 101 if side != "full" else 201)
    assert g.x[0] == lo and g.x[-1] == hi
    assert g.h == pytest.approx(0.1)


def test_grid_rejects_bad_input():
    with pytest.raises(ValueError):
        make_grid("right", -1.0, 10)
    with pytest.raises(ValueError):
        make_grid("right", 1.0, 8)


def test_points_for_spacing():
    assert points_for_spacing("right", 10.0, 0.01) == 1001
    assert points_for_spacing("full", 10.0, 0.01) == 2001


def test_field_is_read_only_and_checked():
    g = make_grid("right", 1.0, 21)
    f = Field(g, np.ones(21))
    with pytest.raises(ValueError):
        f.values[0] = 2.0
    with pytest.raises(ValueError):
        Field(g, np.ones(20))
    with pytest.raises(ValueError):
        Field(g, np.full(21, np.nan))
    with pytest.raises(ValueError):
        f + Field(make_grid("right", 2.0, 21), np.ones(21))


def test_trapezoid_exact_for_linear():
    x = np.linspace(0, 2, 21)
    assert trapezoid(3 * x + 1, x[1] - x[0]) == pytest.approx(8.0, abs=1e-13)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_derivative_second_order(order):
    errs = []
    for n in (401, 801):
        g = make_grid("full", 10.0, n)
        v = np.exp(-g.x ** 2)
        exact = {1: -2 * g.x * v, 2: (4 * g.x ** 2 - 2) * v,
                 3: (-8 * g.x ** 3 + 12 * g.x) * v}[order]
        errs.append(np.max(np.abs(diff_values(v, g.h, order) - exact)))
    assert np.log2(errs[0] / errs[1]) > 1.8


def test_norms_of_gaussian():
    g = make_grid("full", 12.0, 4801)
    f = Field(g, np.exp(-g.x ** 2))
    l2 = np.sqrt(np.pi / 2) ** 0.5
    assert norm(f, "L2") == pytest.approx(l2, rel=1e-8)
    # int (2x e^{-x^2})^2 = sqrt(pi/2)
    assert norm(f, "H1") == pytest.approx(np.sqrt(np.sqrt(np.pi / 2) * 2), rel=1e-4)
    with pytest.raises(ValueError):
        norm(f, "H2")


def test_norm_split_matches_smooth_norm():
    g = make_grid("full", 12.0, 2401)
    f = Field(g, np.exp(-(g.x - 1) ** 2))
    assert norm_split(f, g.origin_index) == pytest.approx(norm(f), rel=1e-4)


def test_field_roundtrip(tmp_path):
    g = make_grid("left", 3.0, 61)
    f = Field(g, np.sin(g.x) / 3.0)
    write_field(f, tmp_path / "f.csv")
    back = read_field(tmp_path / "f.csv")
    assert back.grid == g
    assert np.array_equal(back.values, f.values)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(-2.0, 2.0))
def test_norm_is_translation_invariant(w, s):
    g = make_grid("full", 30.0, 3001)
    a = norm(Field(g, np.exp(-((g.x - s) / w) ** 2)))
    b = norm(Field(g, np.exp(-(g.x / w) ** 2)))
    assert a == pytest.approx(b, rel=1e-6)


def test_derivative_field_wrapper():
    g = make_grid("right", 5.0, 501)
    d = derivative(Field(g, g.x ** 2), 1)
    assert np.allclose(d.values, 2 * g.x, atol=1e-10)
