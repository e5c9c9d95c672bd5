import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lattice import (
    DENSE_LIMIT,
    HamiltonianSpec,
    SquareWellSpec,
    build_hamiltonian,
    build_kinetic,
    continuum_level,
    kinetic_spectrum,
    param_names,
    reliable_level_cutoff,
    square_well_energy,
    square_well_levels,
)


def test_param_names_skip_energy():
    assert param_names(4) == ("A", "B", "C", "D")
    assert "E" not in param_names(6)
    with pytest.raises(ValueError):
        param_names(-1)


def test_spec_validation():
    with pytest.raises(ValueError):
        HamiltonianSpec(1)
    with pytest.raises(ValueError):
        HamiltonianSpec(4, (1.0, 2.0, 3.0))
    spec = HamiltonianSpec(5, (1, 2))
    assert spec.params == (1.0, 2.0)
    assert spec.named_params() == {"A": 1.0, "B": 2.0}


def test_diagonal_layout():
    diag = HamiltonianSpec(4, (1.0, 2.0)).diagonal()
    np.testing.assert_array_equal(diag, [-1j, -2j, 2j, 1j])
    diag = HamiltonianSpec(5, (0.5,)).diagonal()
    np.testing.assert_array_equal(diag, [-0.5j, 0, 0, 0, 0.5j])


def test_kinetic_shift_only_translates():
    plain = HamiltonianSpec(6, (0.3, 0.1))
    shifted = HamiltonianSpec(6, (0.3, 0.1), include_kinetic_shift=True)
    np.testing.assert_allclose(shifted.diagonal(), plain.diagonal() + 2.0)
    a = np.sort_complex(np.linalg.eigvals(build_hamiltonian(plain).to_dense()))
    b = np.sort_complex(np.linalg.eigvals(build_hamiltonian(shifted).to_dense()))
    np.testing.assert_allclose(b, a + 2.0, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(
    N=st.integers(min_value=2, max_value=20),
    values=st.lists(st.floats(min_value=-3, max_value=3), max_size=10),
)
def test_hamiltonian_is_pt_symmetric(N, values):
    spec = HamiltonianSpec(N, tuple(values[: N // 2]))
    matrix = build_hamiltonian(spec)
    assert matrix.is_pt_symmetric()
    dense = matrix.to_dense()
    assert np.all(np.diag(dense, 1) == -1)
    assert np.all(np.diag(dense, -1) == -1)


def test_storage_and_sparse_form():
    assert build_kinetic(DENSE_LIMIT).storage == "dense"
    assert build_kinetic(DENSE_LIMIT + 1).storage == "banded"
    matrix = build_hamiltonian(HamiltonianSpec(7, (0.4, -0.2, 0.9)))
    np.testing.assert_allclose(matrix.to_sparse().toarray(), matrix.to_dense())
    data = matrix.to_dict()
    assert data["dimension"] == 7
    assert data["offdiagonal"] == -1.0


def test_single_site_kinetic():
    matrix = build_kinetic(1)
    np.testing.assert_array_equal(matrix.to_dense(), [[2.0]])
    with pytest.raises(ValueError):
        build_kinetic(0)


def test_kinetic_spectrum_matches_matrix():
    np.testing.assert_allclose(kinetic_spectrum(3), [2 - math.sqrt(2), 2, 2 + math.sqrt(2)])
    for N in (2, 5, 12):
        exact = kinetic_spectrum(N)
        numeric = np.linalg.eigvalsh(build_kinetic(N).to_dense().real)
        np.testing.assert_allclose(exact, numeric, atol=1e-12)
    np.testing.assert_allclose(kinetic_spectrum(4, mesh=0.5), kinetic_spectrum(4) * 4)


def test_square_well_spec():
    with pytest.raises(ValueError):
        SquareWellSpec(0.5, 1.2)
    with pytest.raises(ValueError):
        SquareWellSpec(0.0, 1.0)
    assert SquareWellSpec.from_dimension(10, 0.1).dimension == 10


def test_square_well_energy():
    spec = SquareWellSpec.from_dimension(6)
    assert square_well_energy(6, spec) == pytest.approx(0.0, abs=1e-20)
    assert square_well_energy(3, spec) == pytest.approx(1.0)
    assert square_well_energy(1, spec) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        square_well_energy(0, spec)


def test_continuum_limit():
    spec = SquareWellSpec(1e-4, 1.0)
    assert square_well_energy(1, spec) == pytest.approx(continuum_level(1, 1.0), rel=1e-6)
    assert continuum_level(2, 1.0) == pytest.approx(4 * math.pi**2)


def test_reliable_levels():
    assert reliable_level_cutoff(7) == 3
    with pytest.raises(ValueError):
        reliable_level_cutoff(1)
    levels = square_well_levels(SquareWellSpec.from_dimension(7))
    assert len(levels) == 7
    assert [flag for _, _, flag in levels] == [True] * 3 + [False] * 4
