import numpy as np
import pytest

from domain import (
    NON_PHYSICAL,
    PHYSICAL,
    boundary_ep_check,
    boundary_to_json,
    extract_boundary,
    grid_csv_rows,
    grid_to_gnuplot,
    quadrant_area,
    scan_domain,
)
from eplocate import EPCandidate, ep4_even, ep5_odd


@pytest.fixture(scope="module")
def grid4():
    return scan_domain(4, resolution=128)


def _axes(n=41):
    return np.linspace(-2.0, 2.0, n), np.linspace(-2.0, 2.0, n)


def test_disc_boundary_is_closed():
    a, b = _axes()
    inside = np.add.outer(a**2, b**2) < 1.0
    lines = extract_boundary(inside, a, b)
    assert len(lines) == 1
    line = lines[0]
    np.testing.assert_allclose(line[0], line[-1])
    radii = np.hypot(line[:, 0], line[:, 1])
    assert np.all(np.abs(radii - 1.0) < 0.1)


def test_two_blobs_give_two_loops():
    a, b = _axes()
    inside = (np.add.outer((a - 1) ** 2, b**2) < 0.25) | (np.add.outer((a + 1) ** 2, b**2) < 0.25)
    assert len(extract_boundary(inside, a, b)) == 2


def test_half_plane_gives_open_line():
    a, b = _axes(40)
    inside = np.repeat((a < 0)[:, None], len(b), axis=1)
    lines = extract_boundary(inside, a, b)
    assert len(lines) == 1
    line = lines[0]
    assert len(line) == len(b)
    np.testing.assert_allclose(line[:, 0], 0.0, atol=1e-12)


def test_trivial_grids_have_no_boundary():
    a, b = _axes(21)
    assert extract_boundary(np.zeros((21, 21), bool), a, b) == []
    assert extract_boundary(np.ones((21, 21), bool), a, b) == []


def test_scan_domain_basic(grid4):
    assert grid4.status.shape == (128, 128)
    assert set(np.unique(grid4.status)) <= {PHYSICAL, NON_PHYSICAL}
    assert grid4.unknown_count == 0
    assert grid4.classify_at(0.0, 0.0) == PHYSICAL
    assert 0 < grid4.physical_area < 16
    assert grid4.boundary
    assert grid4.band_width == pytest.approx(4 / 127)


def test_scan_domain_parameter_symmetry(grid4):
    mismatch = np.mean(grid4.is_physical != grid4.is_physical[::-1, ::-1])
    assert mismatch <= 0.01
    plus = quadrant_area(grid4, 1, 1)
    minus = quadrant_area(grid4, -1, -1)
    assert plus == pytest.approx(minus, rel=0.05)
    total = sum(quadrant_area(grid4, sa, sb) for sa in (1, -1) for sb in (1, -1))
    assert total <= grid4.physical_area + 1e-12


def test_scan_domain_validation():
    with pytest.raises(ValueError):
        scan_domain(4, resolution=8)
    with pytest.raises(ValueError):
        scan_domain(3)
    with pytest.raises(ValueError):
        quadrant_area(scan_domain(4, resolution=16), 0, 1)


def test_contains():
    grid = scan_domain(5, a_range=(-1.0, 1.0), b_range=(0.0, 2.0), resolution=16)
    assert grid.contains(0.5, 1.5)
    assert not grid.contains(0.5, -0.5)
    assert grid.N == 5


def test_exceptional_points_sit_on_boundary(grid4):
    report = boundary_ep_check(grid4, ep4_even(2))
    assert report
    assert all(r.in_range for r in report)
    assert not any(r.flagged for r in report)


def test_ep5_boundary_check():
    grid = scan_domain(5, resolution=128)
    report = boundary_ep_check(grid, ep5_odd(2))
    assert any(r.in_range for r in report)
    assert not any(r.flagged for r in report if r.in_range)


def test_boundary_check_skips_foreign_candidates(grid4):
    other_n = EPCandidate(6, (1.0, 0.5), 4, verified=True)
    unverified = EPCandidate(4, (0.1, 0.1), 4, verified=False)
    far = EPCandidate(4, (5.0, 5.0), 4, verified=True)
    report = boundary_ep_check(grid4, [other_n, unverified, far])
    assert len(report) == 1
    assert report[0].flagged and not report[0].in_range


@pytest.fixture(scope="module")
def grids256():
    return {N: scan_domain(N, resolution=256) for N in (4, 5, 6)}


def test_odd_dimension_has_larger_mixed_quadrant(grids256):
    # A<0, B>0 象限：N=5 约 1.16，N=4 约 0.82
    area4 = quadrant_area(grids256[4], -1, 1)
    area5 = quadrant_area(grids256[5], -1, 1)
    assert area5 > area4
    assert area4 == pytest.approx(0.818, rel=0.05)
    assert area5 == pytest.approx(1.159, rel=0.05)


@pytest.mark.parametrize("N", [4, 5, 6])
def test_area_stable_under_refinement(grids256, N):
    coarse = grids256[N].physical_area
    fine = scan_domain(N, resolution=512).physical_area
    assert abs(fine - coarse) / fine < 0.02


@pytest.mark.parametrize("N", [4, 5])
def test_classification_stable_under_tighter_tolerances(N):
    loose = scan_domain(N, resolution=128)
    tight = scan_domain(N, resolution=128, tol_imag_rel=1e-10, tol_gap=1e-9)
    assert np.mean(loose.status != tight.status) <= 0.002


@pytest.mark.parametrize("N, locate", [(4, lambda: ep4_even(2)), (5, lambda: ep5_odd(2))])
def test_boundary_check_at_fine_resolution(N, locate):
    grid = scan_domain(N, resolution=512)
    report = [r for r in boundary_ep_check(grid, locate()) if r.in_range]
    assert report
    for r in report:
        assert r.radius == pytest.approx(8 * 4 / 511)
        assert not r.flagged
        assert r.distance <= r.radius
        assert r.zoom_distance < r.distance


def test_boundary_check_flags_point_off_the_boundary(grid4):
    # 原点在物理区域内部，离边界很远
    inside = EPCandidate(4, (0.0, 0.0), 4, verified=True)
    report = boundary_ep_check(grid4, [inside])
    assert report[0].in_range and report[0].flagged
    assert report[0].zoom_distance is None or report[0].zoom_distance > report[0].radius / 2
    plain = boundary_ep_check(grid4, [inside], zoom=False)[0]
    assert plain.flagged and plain.zoom_distance is None
    with pytest.raises(ValueError):
        boundary_ep_check(grid4, [inside], radius=0.0)


def test_exports():
    grid = scan_domain(4, resolution=16)
    rows = grid_csv_rows(grid)
    assert len(rows) == 16 * 16
    assert set(rows[0]) == {"A", "B", "flag"}
    text = grid_to_gnuplot(grid)
    assert text.startswith("# N=4")
    assert text.count("\n\n") == 16
    lines = boundary_to_json(grid)
    assert all(len(point) == 2 for line in lines for point in line)
    assert grid.to_dict()["resolution"] == [16, 16]
