import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lonestar.arrays import (
    Direction,
    UpaGeometry,
    array_response,
    default_coverage_grid,
    steering_matrix,
)


def brute_force_response(geom, az, el):
    """Independent oracle: per-element path-length phases via explicit loops."""
    ux = np.cos(el) * np.sin(az)
    uy = np.cos(el) * np.cos(az)
    uz = np.sin(el)
    out = np.empty(geom.rows * geom.cols, dtype=complex)
    for r in range(geom.rows):
        for c in range(geom.cols):
            px = c * geom.element_spacing
            py = 0.0
            pz = -r * geom.element_spacing
            path = px * ux + py * uy + pz * uz
            out[r * geom.cols + c] = np.cos(2 * np.pi * path) + 1j * np.sin(2 * np.pi * path)
    return out


def test_broadside_two_element_is_all_ones():
    geom = UpaGeometry(rows=1, cols=2, element_spacing=0.5)
    a = array_response(geom, Direction(0.0, 0.0))
    np.testing.assert_allclose(a, [1.0, 1.0], atol=1e-15)


def test_endfire_two_element_half_wavelength_pi_shift():
    geom = UpaGeometry(rows=1, cols=2, element_spacing=0.5)
    a = array_response(geom, Direction(np.pi / 2, 0.0))
    # half-wavelength path difference: second element pi out of phase
    np.testing.assert_allclose(a[0], 1.0, atol=1e-15)
    np.testing.assert_allclose(a[1] / a[0], -1.0, atol=1e-12)


def test_8x8_matches_brute_force_geometry():
    geom = UpaGeometry(rows=8, cols=8, element_spacing=0.5)
    d = Direction.from_degrees(15.0, -30.0)
    a = array_response(geom, d)
    assert np.linalg.norm(a) ** 2 == pytest.approx(64.0, rel=1e-12)
    np.testing.assert_allclose(a, brute_force_response(geom, d.azimuth, d.elevation), atol=1e-12)


def test_steering_matrix_single_direction():
    geom = UpaGeometry(2, 3)
    d = Direction.from_degrees(10.0, 5.0)
    sm = steering_matrix(geom, [d])
    assert sm.entries.shape == (6, 1)
    np.testing.assert_array_equal(sm.entries[:, 0], array_response(geom, d))


def test_steering_matrix_paper_grid_dimensions():
    geom = UpaGeometry(8, 8)
    sm = steering_matrix(geom, default_coverage_grid("transmit"))
    assert sm.entries.shape == (64, 45)


def test_steering_matrix_duplicate_directions_identical_columns():
    geom = UpaGeometry(4, 4)
    d = Direction.from_degrees(-20.0, 10.0)
    sm = steering_matrix(geom, [d, d])
    np.testing.assert_array_equal(sm.entries[:, 0], sm.entries[:, 1])


def test_steering_matrix_rejects_empty_region():
    with pytest.raises(ValueError):
        steering_matrix(UpaGeometry(2, 2), [])


def test_default_grid_bounds_count_and_symmetry():
    grid = default_coverage_grid("transmit")
    assert len(grid) == 45
    assert grid[0].azimuth == pytest.approx(np.deg2rad(-60.0))
    assert grid[0].elevation == pytest.approx(np.deg2rad(-30.0))
    assert default_coverage_grid("receive") == grid
    mirrored = {(round(-d.azimuth, 12), round(d.elevation, 12)) for d in grid}
    original = {(round(d.azimuth, 12), round(d.elevation, 12)) for d in grid}
    assert mirrored == original


def test_direction_range_validation():
    with pytest.raises(ValueError):
        Direction(4.0, 0.0)
    with pytest.raises(ValueError):
        Direction(0.0, 2.0)


geometries = st.builds(
    UpaGeometry,
    rows=st.integers(1, 6),
    cols=st.integers(1, 6),
    element_spacing=st.floats(0.1, 2.0, allow_nan=False),
)
directions = st.builds(
    Direction,
    azimuth=st.floats(-np.pi, np.pi, allow_nan=False),
    elevation=st.floats(-np.pi / 2, np.pi / 2, allow_nan=False),
)


@settings(max_examples=100, deadline=None)
@given(geom=geometries, d=directions)
def test_response_unit_modulus_and_norm(geom, d):
    a = array_response(geom, d)
    np.testing.assert_allclose(np.abs(a), 1.0, rtol=1e-12)
    assert np.linalg.norm(a) ** 2 == pytest.approx(geom.num_elements, rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(geom=geometries, d=directions)
def test_response_deterministic_and_origin_phase_zero(geom, d):
    a1 = array_response(geom, d)
    a2 = array_response(geom, d)
    np.testing.assert_array_equal(a1, a2)
    assert a1[0] == 1.0 + 0.0j


@settings(max_examples=25, deadline=None)
@given(geom=geometries, ds=st.lists(directions, min_size=1, max_size=5))
def test_steering_columns_match_responses_exactly(geom, ds):
    sm = steering_matrix(geom, ds)
    for i, d in enumerate(ds):
        np.testing.assert_array_equal(sm.entries[:, i], array_response(geom, d))


def test_origin_offset_does_not_change_far_field_response():
    base = UpaGeometry(3, 3, 0.5)
    moved = UpaGeometry(3, 3, 0.5, origin_offset=(1.0, -2.0, 7.5))
    d = Direction.from_degrees(25.0, -10.0)
    np.testing.assert_array_equal(array_response(base, d), array_response(moved, d))
