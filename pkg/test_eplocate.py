import json
import math
from pathlib import Path

import numpy as np
import pytest

from eplocate import (
    asymptotic_constants,
    asymptotic_table,
    ep2_one_param,
    ep4_asymptotic,
    ep4_even,
    ep4_roots,
    ep5_a_roots,
    ep5_b_roots,
    ep5_odd,
    ep_multi_newton,
    mirror,
    newton_search,
    odd_elimination_polynomial,
    seed_grid,
    theorem_certificate,
    verify,
    z_curves,
    z_polynomial,
)
from lattice import HamiltonianSpec
from polyalg import UniPoly
from settings import Settings
from spectra import eigen_solve, splitting_exponent

REFERENCE = json.loads(Path(__file__).with_name("reference_values.json").read_text(encoding="utf-8"))


def _has_mirror(candidates, tol=1e-6):
    for cand in candidates:
        target = -np.asarray(cand.params)
        if not any(np.linalg.norm(np.asarray(c.params) - target) < tol for c in candidates):
            return False
    return True


def test_z_polynomial():
    assert z_polynomial(2, 1).coefficients == (1, 0, -2, 2, 1)
    assert z_polynomial(4, -1).coefficients == (3, 0, -6, -2, 1)
    assert z_polynomial(5, 1).mirrored().coefficients == z_polynomial(5, -1).coefficients
    with pytest.raises(ValueError):
        z_polynomial(1, 1)
    with pytest.raises(ValueError):
        z_polynomial(3, 0)


@pytest.mark.parametrize("K", range(2, 13))
def test_theorem_certificate(K):
    cert = theorem_certificate(K)
    assert cert.holds
    assert all(p.is_zero() for p in cert.cleared_ck.values())
    assert all(r is not None for r in cert.ratios.values())
    assert cert.to_dict()["holds"] is True


@pytest.mark.parametrize("K", range(2, 8))
def test_z_roots_match_reference(K):
    expected = [float(v) for v in REFERENCE["table1"]["rows"][str(K)]]
    got = ep4_roots(K, 1)
    assert len(got) == len(expected)
    assert got == pytest.approx(expected, abs=1e-8)


def test_z_roots_large_k_trend():
    roots = ep4_roots(200, 1)
    assert len(roots) == 4
    assert roots[0] == pytest.approx(-math.sqrt(2), abs=5e-3)
    assert roots[-1] == pytest.approx(math.sqrt(2), abs=5e-3)
    assert all(abs(x) < 6e-2 for x in roots[1:3])
    central = ep4_roots(2000, 1)[1:3]
    assert all(abs(x) < 2e-2 for x in central)


def test_ep4_candidates():
    candidates = ep4_even(4)
    assert candidates
    assert all(c.verified and c.order == 4 and c.N == 8 for c in candidates)
    assert any(np.allclose(c.params, (1.0, -2.0), atol=1e-9) for c in candidates)
    assert _has_mirror(candidates)
    with pytest.raises(ValueError):
        ep4_even(1)


@pytest.mark.parametrize("K", [2, 3])
def test_ep4_central_spectrum(K):
    for cand in ep4_even(K):
        report = eigen_solve(cand.to_spec(), cross_check=False)
        central = report.eigenvalues[report.central(4)]
        assert np.all(np.abs(central) < 1e-2)


def test_verify():
    residuals, ok = verify(8, (1.0, -2.0), 4)
    assert ok
    assert len(residuals) == 2
    _, ok = verify(8, (1.0, -1.9), 4)
    assert not ok
    with pytest.raises(ValueError):
        verify(8, (1.0, -2.0), 10)


def test_mirror():
    cand = ep4_even(3)[0]
    other = mirror(cand)
    assert other.params == tuple(-v for v in cand.params)
    assert other.verified


def test_z_curves():
    curves = z_curves([2], [0.0, 1.0], sign=-1)
    np.testing.assert_allclose(curves[2], [1.0, -2.0])


def test_asymptotic_constants():
    expected = [float(v) for v in REFERENCE["table2"]["constants"].values()]
    assert list(asymptotic_constants()) == pytest.approx(expected, abs=1e-9)


def test_asymptotic_table_matches_reference():
    table = REFERENCE["table2"]
    rows = asymptotic_table([int(n) // 2 for n in table["rows"]])
    for row in rows:
        printed = table["rows"][str(row["N"])]
        for ours, column in table["columns"].items():
            digits = len(printed[column].split(".")[1])
            assert abs(row[ours] - float(printed[column])) <= 10.0 ** -digits
        assert row["exact"] == pytest.approx(float(printed["exact"]), abs=1e-8)


def test_asymptotic_error_shrinks_with_order():
    errors = [abs(ep4_asymptotic(7, order).error) for order in (1, 2, 3)]
    assert errors[0] > errors[1] > errors[2]
    assert ep4_asymptotic(7).g == pytest.approx(1 / 6)
    with pytest.raises(ValueError):
        ep4_asymptotic(7, 4)


@pytest.mark.parametrize("N", ["5", "7", "9"])
def test_odd_elimination_polynomial(N):
    K = int(N) // 2
    uni = odd_elimination_polynomial(K, "A")
    assert uni.name == "y"
    printed = UniPoly(tuple(REFERENCE["table3"]["elimination"][N]), "y")
    assert uni.is_proportional_to(printed)


@pytest.mark.parametrize("N", ["5", "7", "9"])
def test_ep5_b_roots(N):
    expected = [float(v) for v in REFERENCE["table3"]["rows"][N]]
    assert ep5_b_roots(int(N) // 2) == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize("N", ["11", "13"])
def test_ep5_a_roots(N):
    expected = [float(v) for v in REFERENCE["table4"]["rows"][N]]
    got = ep5_a_roots(int(N) // 2)
    for value in expected:
        assert min(abs(a - value) for a in got) < 1e-8


def test_ep5_candidates():
    candidates = ep5_odd(2)
    assert candidates
    assert all(c.verified and c.order == 5 and c.N == 5 for c in candidates)
    assert _has_mirror(candidates)
    b_roots = ep5_b_roots(2)
    for cand in candidates:
        assert min(abs(abs(cand.params[1]) - b) for b in b_roots) < 1e-8


def test_ep5_elimination_order_agrees():
    by_a = ep5_odd(3, "A")
    by_b = ep5_odd(3, "B")
    assert len(by_a) == len(by_b)
    for cand in by_a:
        assert any(np.allclose(cand.params, c.params, atol=1e-6) for c in by_b)
    with pytest.raises(ValueError):
        odd_elimination_polynomial(3, "C")


def test_ep5_splitting_exponent():
    cand = ep5_odd(2)[0]
    assert splitting_exponent(cand, mode="matrix") == pytest.approx(0.2, abs=0.04)


@pytest.mark.parametrize("N", range(4, 25, 2))
def test_ep2_one_parameter(N):
    cand = ep2_one_param(N)
    assert cand.params == (1.0,)
    assert cand.verified and cand.order == 2
    assert mirror(cand).params == (-1.0,)
    assert mirror(cand).verified


def test_ep2_one_parameter_rejects_odd_n():
    with pytest.raises(ValueError):
        ep2_one_param(5)


def test_seed_grid():
    seeds = seed_grid(2, 3)
    assert len(seeds) == 9
    assert (-2.0, -2.0) in seeds
    assert (2.0, 2.0) in seeds


def test_newton_rejects_bad_input():
    with pytest.raises(ValueError):
        newton_search(6, 3)
    with pytest.raises(ValueError):
        newton_search(7, 3, seeds=[(0.1, 0.2)])


@pytest.mark.parametrize("N,p,order", [(7, 3, 7), (8, 3, 6)])
def test_newton_three_parameter_models(N, p, order):
    search = newton_search(N, p, settings=Settings(threads=2))
    summary = search.to_dict()
    assert summary["seeds"] == 9 ** p
    assert summary["converged"] + summary["singular"] + summary["diverged"] == summary["seeds"]
    assert search.candidates
    for cand in search.candidates:
        assert cand.verified and cand.order == order
        report = eigen_solve(HamiltonianSpec(N, cand.params), cross_check=False)
        central = report.eigenvalues[report.central(order)]
        assert np.all(np.abs(central) < 0.05)
    assert _has_mirror(search.candidates)


def test_newton_four_parameter_model():
    candidates = ep_multi_newton(8, 4, seeds=seed_grid(4, 5), settings=Settings(threads=2))
    assert candidates
    assert all(c.verified and c.order == 8 and c.param_count == 4 for c in candidates)


@pytest.mark.parametrize("K", range(2, 13))
def test_z_mirror_identity(K):
    assert z_polynomial(K, 1).mirrored().coefficients == z_polynomial(K, -1).coefficients


@pytest.mark.parametrize("K", range(2, 8))
def test_cubic_and_reciprocal_b_agree(K):
    for sign, shift in ((1, 1.0), (-1, -1.0)):
        for x in ep4_roots(K, sign):
            cubic = (K - 1) * x**3 - 2 * (K - 1) * x
            assert cubic + shift == pytest.approx(-sign - 1 / x, abs=1e-10)
