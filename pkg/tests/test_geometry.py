import math

import numpy as np
import pytest

from homegeo.geometry import (NIL3, NIL3_Y, SOL3, Chart, Isometry, IsometryKind, Point, SpaceId,
                              apply_isometry, canonical_frame_at, compose, connection_table, frame_connection,
                              inner, killing_field_at, killing_indices, metric_at, nil_chart_convert, sol_T,
                              sol_isotropy_group)
from homegeo.oracles import connection_table_fd, lie_derivative_metric_fd, pullback_defect

SPACES = [SOL3, NIL3]


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def test_sol_y_chart_rejected():
    with pytest.raises(ValueError):
        SpaceId("sol3", Chart.NIL_Y)


def test_parse_names():
    assert SpaceId.parse("Sol3") == SOL3
    assert SpaceId.parse("nil3") == NIL3
    assert SpaceId.parse("nil_y") == NIL3_Y
    with pytest.raises(ValueError):
        SpaceId.parse("h2xr")


def test_sol_metric_values():
    np.testing.assert_allclose(metric_at(SOL3, (0, 0, 0)), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(metric_at(SOL3, (0, 0, 1)), np.diag([7.389056, 0.135335, 1.0]), atol=1e-6)


def test_nil_metric_value():
    np.testing.assert_allclose(metric_at(NIL3, (2, 0, 0)), [[1, 0, 0], [0, 2, -1], [0, -1, 1]], atol=1e-15)


def test_frames_match_definitions():
    s = 0.7
    F = canonical_frame_at(SOL3, (0.3, -1.0, s))
    np.testing.assert_allclose(F, np.diag([math.exp(-s), math.exp(s), 1.0]), atol=1e-15)
    x1, x2 = 1.5, -0.4
    F = canonical_frame_at(NIL3, (x1, x2, 2.0))
    np.testing.assert_allclose(F[:, 0], [1, 0, -x2 / 2])
    np.testing.assert_allclose(F[:, 1], [0, 1, x1 / 2])
    np.testing.assert_allclose(F[:, 2], [0, 0, 1])


@pytest.mark.parametrize("space", SPACES, ids=str)
def test_frame_orthonormal_at_random_points(space, rng):
    p = rng.uniform(-3, 3, size=(1000, 3))
    F = canonical_frame_at(space, p)
    G = metric_at(space, p)
    gram = np.einsum("nia,nij,njb->nab", F, G, F)
    assert np.max(np.abs(gram - np.eye(3))) < 1e-12


def test_connection_table_entries():
    np.testing.assert_allclose(frame_connection(SOL3, [1, 0, 0], [1, 0, 0]), [0, 0, -1])
    np.testing.assert_allclose(frame_connection(NIL3, [1, 0, 0], [0, 1, 0]), [0, 0, 0.5])
    for v in np.eye(3):
        np.testing.assert_allclose(frame_connection(SOL3, [0, 0, 1], v), 0.0)


@pytest.mark.parametrize("space", SPACES, ids=str)
def test_connection_table_metric_compatible(space):
    # <nabla_X E_i, E_j> + <E_i, nabla_X E_j> = 0 for frame fields
    T = connection_table(space)
    for x in range(3):
        np.testing.assert_array_equal(T[x], -T[x].T)


@pytest.mark.parametrize("space", SPACES, ids=str)
def test_connection_table_matches_christoffel_oracle(space, rng):
    table = connection_table(space)
    for p in rng.uniform(-1.5, 1.5, size=(20, 3)):
        assert np.max(np.abs(connection_table_fd(space, p) - table)) < 1e-6


def test_isometry_examples():
    np.testing.assert_allclose(apply_isometry(SOL3, sol_T(1.0), (1, 1, 0)), [math.exp(-1), math.e, 1])
    np.testing.assert_allclose(apply_isometry(NIL3, Isometry(IsometryKind.NIL_TRANSLATE1, 2.0), (0, 1, 0)),
                               [2, 1, 1])
    sigma = Isometry(IsometryKind.SOL_SIGMA)
    np.testing.assert_allclose(apply_isometry(SOL3, compose(sigma, sigma), (1, 2, 3)), [-1, -2, 3])


def test_isometry_rejects_wrong_space():
    with pytest.raises(ValueError):
        apply_isometry(NIL3, sol_T(1.0), (0, 0, 0))


def test_group_relations(rng):
    p = rng.normal(size=(50, 3))
    sigma = Isometry(IsometryKind.SOL_SIGMA)
    tau = Isometry(IsometryKind.SOL_TAU)
    np.testing.assert_allclose(apply_isometry(SOL3, compose(sigma, sigma, sigma, sigma), p), p, atol=0)
    np.testing.assert_allclose(apply_isometry(SOL3, compose(tau, tau), p), p, atol=0)
    np.testing.assert_allclose(apply_isometry(SOL3, compose(sol_T(0.8), sol_T(-0.8)), p), p, atol=1e-12)


def test_composition_associative(rng):
    p = rng.normal(size=(10, 3))
    a, b, c = (Isometry(IsometryKind.NIL_TRANSLATE1, 0.3), Isometry(IsometryKind.NIL_ROTATE, 1.1),
               Isometry(IsometryKind.NIL_TRANSLATE2, -0.6))
    np.testing.assert_allclose(apply_isometry(NIL3, compose(compose(a, b), c), p),
                               apply_isometry(NIL3, compose(a, compose(b, c)), p), atol=1e-14)


def test_isotropy_group_closed():
    group = sol_isotropy_group()
    assert len(group) == 8
    probe = np.array([[0.3, -1.2, 0.7]])
    images = {tuple(np.round(apply_isometry(SOL3, g, probe)[0], 12)) for g in group}
    assert len(images) == 8
    for g in group:
        for h in group:
            img = tuple(np.round(apply_isometry(SOL3, compose(g, h), probe)[0], 12))
            assert img in images
    # every element fixes the origin
    for g in group:
        np.testing.assert_allclose(apply_isometry(SOL3, g, np.zeros(3)), 0.0, atol=0)


@pytest.mark.parametrize("space,kinds", [
    (SOL3, [IsometryKind.SOL_TRANSLATE_X1, IsometryKind.SOL_TRANSLATE_X2, IsometryKind.SOL_TC,
            IsometryKind.SOL_SIGMA, IsometryKind.SOL_TAU]),
    (NIL3, [IsometryKind.NIL_TRANSLATE1, IsometryKind.NIL_TRANSLATE2, IsometryKind.NIL_VERTICAL,
            IsometryKind.NIL_ROTATE, IsometryKind.NIL_REFLECT]),
], ids=["sol3", "nil3"])
def test_isometries_pull_back_metric(space, kinds, rng):
    for kind in kinds:
        g = Isometry(kind, 0.9)
        for _ in range(10):
            p, v, w = rng.normal(size=(3, 3))
            assert abs(pullback_defect(space, g, p, v, w)) < 1e-6


def test_killing_examples():
    np.testing.assert_allclose(killing_field_at(SOL3, 3, (1, 1, 0)), [-1, 1, 1])
    np.testing.assert_allclose(killing_field_at(NIL3, 1, (0, 2, 0)), [1, 0, 1])
    with pytest.raises(ValueError):
        killing_field_at(SOL3, 4, (0, 0, 0))


@pytest.mark.parametrize("space", SPACES, ids=str)
def test_killing_fields_preserve_metric(space, rng):
    for k in killing_indices(space):
        for p in rng.uniform(-2, 2, size=(10, 3)):
            assert np.max(np.abs(lie_derivative_metric_fd(space, k, p))) <= 1e-6


def test_nil_chart_convert():
    np.testing.assert_allclose(nil_chart_convert(np.array([1.0, 2.0, 0.0]), Chart.NIL_Y), [1, 2, 1])
    np.testing.assert_allclose(nil_chart_convert(np.zeros(3), Chart.NIL_Y), 0.0)
    p = Point((0.4, -1.3, 2.2))
    back = nil_chart_convert(nil_chart_convert(p, Chart.NIL_Y), Chart.CANONICAL)
    assert back.chart is Chart.CANONICAL
    np.testing.assert_allclose(back.coords, p.coords, atol=1e-15)


def test_y_chart_frame_is_orthonormal(rng):
    p = rng.normal(size=(100, 3))
    F = canonical_frame_at(NIL3_Y, p, allow_y_chart=True)
    gram = np.einsum("nia,nij,njb->nab", F, metric_at(NIL3_Y, p), F)
    assert np.max(np.abs(gram - np.eye(3))) < 1e-12


def test_inner_is_frame_norm(rng):
    p = rng.normal(size=3)
    a = rng.normal(size=3)
    v = canonical_frame_at(SOL3, p) @ a
    assert inner(SOL3, p, v, v) == pytest.approx(a @ a, rel=1e-12)


def test_point_json_roundtrip():
    p = Point((1.0, 2.0, 3.0), Chart.NIL_Y)
    assert Point.from_json(p.to_json()) == p
    g = compose(Isometry(IsometryKind.NIL_ROTATE, 0.5), Isometry(IsometryKind.NIL_REFLECT))
    assert Isometry.from_json(g.to_json()) == g
