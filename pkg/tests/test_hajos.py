"""Triangular decompositions of critical lattices and cube tilings."""

import numpy as np
import pytest

from dirichlet_lab import (
    LatticeBasis,
    decompose_critical,
    random_critical_basis,
    random_unimodular_basis,
    shortest_sup_vector,
    tiling_check,
)
from dirichlet_lab.lattice import random_integral_unimodular
from dirichlet_lab.errors import NegativeR, ToleranceTooLoose
from dirichlet_lab.rng import worker_rng


def assert_valid_decomposition(L, dec, tol=1e-9):
    d = L.dim
    # u unit upper triangular with reduced off-diagonal entries
    assert np.allclose(np.diag(dec.u), 1.0)
    assert np.allclose(np.tril(dec.u, -1), 0.0)
    upper = dec.u[np.triu_indices(d, 1)]
    assert np.all((upper > -0.5 - 1e-12) & (upper <= 0.5 + 1e-12))
    # gamma is an exact integer unimodular change of basis
    assert dec.gamma.dtype == np.int64
    assert abs(round(float(np.linalg.det(dec.gamma.astype(float))))) == 1
    # the certified identity basis @ gamma = w u w^-1
    assert dec.residual < tol
    lhs = L.matrix @ dec.gamma
    assert np.max(np.abs(lhs - dec.basis_matrix)) < 10 * tol
    # and the conjugated triangular matrix generates the same lattice
    assert L.same_lattice(LatticeBasis(dec.basis_matrix))


class TestDecompose:
    def test_identity(self):
        dec = decompose_critical(LatticeBasis.identity(3))
        assert dec is not None
        assert np.array_equal(dec.u, np.eye(3))
        assert dec.residual == 0.0

    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_random_critical_roundtrip(self, d):
        rng = worker_rng(50, d)
        for _ in range(10):
            L, _perm, _u = random_critical_basis(d, rng)
            dec = decompose_critical(L)
            assert dec is not None
            assert_valid_decomposition(L, dec)

    def test_entry_reduction(self):
        # a generator entry outside (-1/2, 1/2] must come back reduced
        u = np.eye(2)
        u[0, 1] = 0.7
        dec = decompose_critical(LatticeBasis(u))
        assert dec is not None
        assert dec.u[0, 1] == pytest.approx(-0.3)

    def test_half_entry_is_canonical(self):
        # the boundary value 1/2 stays (interval closed on the right)
        u = np.eye(2)
        u[0, 1] = 0.5
        dec = decompose_critical(LatticeBasis(u))
        assert dec is not None
        assert abs(dec.u[0, 1]) == pytest.approx(0.5)

    def test_integer_basis_is_standard_lattice(self):
        # any integer unimodular basis generates Z^d: u must reduce to I
        rng = worker_rng(51, 0)
        for d in (2, 3):
            L = LatticeBasis(random_integral_unimodular(d, rng).astype(float))
            dec = decompose_critical(L)
            assert dec is not None
            assert np.allclose(dec.u, np.eye(d), atol=1e-12)

    def test_generic_lattice_not_critical(self):
        # Gaussian det-1 lattices almost surely have a vector shorter
        # than 1 or a covering defect: no decomposition exists
        rng = worker_rng(56, 0)
        rejected = 0
        for _ in range(10):
            L = random_unimodular_basis(3, rng)
            _, length = shortest_sup_vector(L)
            dec = decompose_critical(L)
            if abs(length - 1.0) > 1e-6:
                assert dec is None
                rejected += 1
        assert rejected >= 8

    def test_obstructed_by_short_vector(self):
        # diag(1/2, 2) contains a vector of length 1/2: not critical
        assert decompose_critical(LatticeBasis(np.diag([0.5, 2.0]))) is None

    def test_scaled_critical_rejected(self):
        rng = worker_rng(52, 0)
        scale = np.diag([0.9, 1.0 / 0.9])
        for _ in range(10):
            L, _, _ = random_critical_basis(2, rng)
            squeezed = LatticeBasis(scale @ L.matrix)
            assert decompose_critical(squeezed) is None

    def test_tolerance_gate(self):
        with pytest.raises(ToleranceTooLoose):
            decompose_critical(LatticeBasis.identity(2), tol=1e-2)

    def test_permuted_coordinates_recovered(self):
        # build from a forced nontrivial permutation; any valid (w, u)
        # pair is acceptable as long as the identity certifies
        u = np.eye(3)
        u[0, 1], u[0, 2], u[1, 2] = 0.25, -0.4, 0.3
        w = np.zeros((3, 3))
        for j, i in enumerate((2, 0, 1)):
            w[i, j] = 1.0
        L = LatticeBasis(w @ u @ w.T)
        dec = decompose_critical(L)
        assert dec is not None
        assert_valid_decomposition(L, dec)


class TestRandomCritical:
    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_shortest_length_exactly_one(self, d):
        rng = worker_rng(53, d)
        for _ in range(10):
            L, _, u = random_critical_basis(d, rng)
            _, length = shortest_sup_vector(L)
            assert length == 1.0
            assert np.all(np.abs(u[np.triu_indices(d, 1)]) <= 0.5)


class TestTiling:
    def test_critical_lattice_tiles(self):
        rng = worker_rng(54, 0)
        L, _, _ = random_critical_basis(3, rng)
        rep = tiling_check(L, probe_count=5_000, rng_seed=7)
        assert rep.region_member
        assert rep.shortest_length == 1.0
        assert rep.covered_fraction == 1.0
        assert rep.n_probes == 5_000

    def test_stretched_lattice_leaves_gaps(self):
        rep = tiling_check(LatticeBasis(np.diag([0.5, 2.0])), probe_count=5_000)
        assert not rep.region_member
        assert rep.shortest_length == 0.5
        assert rep.covered_fraction < 1.0

    def test_positive_radius_defers_to_K_r(self):
        rng = worker_rng(55, 0)
        L, _, _ = random_critical_basis(2, rng)
        assert tiling_check(L, r=0.2, probe_count=2_000).region_member
        shrunk = LatticeBasis(np.diag([0.7, 1.0 / 0.7]))
        assert not tiling_check(shrunk, r=0.2, probe_count=2_000).region_member
        assert tiling_check(shrunk, r=0.4, probe_count=2_000).region_member

    def test_negative_radius_rejected(self):
        with pytest.raises(NegativeR):
            tiling_check(LatticeBasis.identity(2), r=-0.1)
