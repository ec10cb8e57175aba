import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import GOLDEN
from ruelle.ifs import BranchMap, Interval, MobiusMap, count_words, make_ifs
from ruelle.potentials import gkw_potential, gkw_roof
from ruelle.pressure import pressure
from ruelle.transfer import (CollocationScheme, NumericalError, SpectralParams, build_matrix, determinant_coefficients,
                             disc_radii, dynamical_determinant, flat_trace, match_stable, matrix_determinant,
                             node_count, orbit_weights, resonances, spectrum)

# (s, z) pairs for the determinant oracle; z is capped at 0.8 / spectral radius
DET_GRID = [(0.6, 0.5), (1.0, 0.8), (1.5 + 2j, 1.0), (2.0, 1.0), (0.6 + 10j, 1.0), (1.0, 0.25)]


def one_branch_spectrum(s, k):
    return GOLDEN ** (2 * s) * (-GOLDEN**2) ** np.arange(k)


class TestParams:
    def test_s(self):
        p = SpectralParams.from_s(0.3 + 4j)
        assert p.a == 0.3 and p.b == 4.0 and p.s == 0.3 + 4j
        assert SpectralParams(1.0, 2 * math.pi).nu == pytest.approx(1.0)

    def test_general_needs_descriptors(self):
        with pytest.raises(ValueError):
            SpectralParams(1.0, 0.0, "general")
        with pytest.raises(ValueError):
            SpectralParams(1.0, 0.0, "other")

    def test_node_count(self):
        assert node_count(0.0, 0.5) == 24
        assert node_count(400.0, 0.5) == 300

    def test_scheme(self):
        sc = CollocationScheme(12)
        x = sc.nodes(0.2, 0.7)
        assert np.all((x > 0.2) & (x < 0.7))
        with pytest.raises(ValueError):
            CollocationScheme(3)
        with pytest.raises(ValueError):
            CollocationScheme(8, "spline")

    @given(st.integers(4, 30), st.floats(-0.99, 0.99))
    def test_lagrange_reproduces_polynomials(self, M, t):
        sc = CollocationScheme(M)
        lo, hi = 0.3, 0.9
        z = np.array([0.6 + 0.3 * t])
        L = sc.lagrange(lo, hi, z)
        nodes = sc.nodes(lo, hi)
        for deg in range(min(M, 6)):
            assert L @ nodes**deg == pytest.approx(z**deg, rel=1e-10, abs=1e-12)


class TestMatrix:
    def test_block_sparsity(self, schottky):
        T = build_matrix(schottky, SpectralParams(1.0, 3.0), CollocationScheme(10))
        for i in range(4):
            for j in range(4):
                blk = T.block(i, j)
                if schottky.A[i, j]:
                    assert np.abs(blk).max() > 0
                else:
                    assert np.all(blk == 0)

    def test_zero_weight(self, gauss2):
        T = build_matrix(gauss2, SpectralParams(0.0), CollocationScheme(12))
        # constants are reproduced: every row sums to the number of branches
        assert np.allclose(T.matrix.sum(axis=1), 2.0)

    def test_general_mode_matches_gkw(self, gauss3, schottky):
        for ifs in (gauss3, schottky):
            a, b = 0.8, 7.0
            gen = SpectralParams(a, b, "general", gkw_potential(ifs, a), gkw_roof(ifs))
            T1 = build_matrix(ifs, gen, CollocationScheme(16)).matrix
            T2 = build_matrix(ifs, SpectralParams(a, -b), CollocationScheme(16)).matrix
            assert np.allclose(T1, T2, rtol=1e-13, atol=1e-14)

    def test_image_outside_target(self):
        g = MobiusMap(1.0, 0.5, 0.0, 1.0)  # x -> x + 1/2 pushes half the nodes off the interval
        ifs = make_ifs([Interval(0.0, 1.0)], [[1]], [BranchMap(0, 0, g)], theta=0.5, check=False)
        with pytest.raises(NumericalError, match="branch 0->0"):
            build_matrix(ifs, SpectralParams(1.0), CollocationScheme(8))

    def test_circle_radius(self, gauss3, schottky):
        for ifs in (gauss3, schottky):
            _, rad, rho = disc_radii(ifs)
            assert rho >= 1.0 and np.all(rad > 0)


class TestResonances:
    @pytest.mark.parametrize("s", [0.0, 0.7, 1.3])
    def test_one_branch_closed_form(self, gauss1, s):
        rs = spectrum(gauss1, SpectralParams(s), M=40, kind="circle")
        ev = rs.eigenvalues[:10]
        ref = one_branch_spectrum(s, 10)
        assert np.max(np.abs(ev - ref) / np.abs(ref)) < 1e-8

    @given(st.floats(0.0, 2.0))
    def test_one_branch_leading(self, s):
        from ruelle.ifs import build_gauss_ifs
        ev = spectrum(build_gauss_ifs(1), SpectralParams(s), M=24).eigenvalues
        assert ev[0] == pytest.approx(GOLDEN ** (2 * s), rel=1e-10)

    def test_sorted_and_flagged(self, gauss3):
        rs = spectrum(gauss3, SpectralParams(1.0, 30.0))
        mod = np.abs(rs.eigenvalues)
        assert np.all(np.diff(mod) <= 1e-15)
        assert rs.stable.any() and not rs.stable.all()
        assert rs.refined_M == rs.M + 8

    @pytest.mark.parametrize("name", ["gauss2", "gauss3"])
    def test_perron(self, name, request):
        ifs = request.getfixturevalue(name)
        lam = spectrum(ifs, SpectralParams(1.0), M=40, kind="circle").eigenvalues[0]
        assert abs(lam.imag) < 1e-14 and lam.real > 0
        assert abs(math.log(lam.real) - pressure(ifs, 1.0, 10, accelerate=True).value) < 1e-6

    def test_conjugation(self, gauss2, schottky):
        for ifs in (gauss2, schottky):
            e1 = spectrum(ifs, SpectralParams(0.9, 12.0), M=32).eigenvalues
            e2 = spectrum(ifs, SpectralParams(0.9, -12.0), M=32).eigenvalues
            assert np.allclose(np.sort_complex(np.conj(e1)), np.sort_complex(e2), atol=1e-12)
            rs = spectrum(ifs, SpectralParams(0.9, 12.0), M=32)
            assert rs.conjugated().params.b == -12.0

    @pytest.mark.parametrize("s", [0.5, 1.0, 1 + 5j, 0.7 + 20j])
    def test_refinement_convergence(self, system, s):
        p = SpectralParams.from_s(s)
        e1 = resonances(build_matrix(system, p, CollocationScheme(32))).stable_eigenvalues[:5]
        e2 = resonances(build_matrix(system, p, CollocationScheme(48))).stable_eigenvalues[:5]
        assert len(e1) == 5 and np.max(np.abs(e1 - e2)) < 1e-8

    def test_refine_step(self, gauss2):
        with pytest.raises(ValueError):
            resonances(build_matrix(gauss2, SpectralParams(1.0), CollocationScheme(8)), refine=1)

    def test_match_stable(self):
        ev = np.array([1.0, 0.5, 1e-3])
        ref = np.array([1.0 + 1e-9, 0.51, 1e-3 + 1e-12])
        assert list(match_stable(ev, ref)) == [True, False, True]


class TestTraces:
    def test_one_orbit(self, gauss1):
        assert flat_trace(gauss1, SpectralParams(0.0), 1) == pytest.approx(1 / (1 + GOLDEN**2), rel=1e-14)

    def test_term_count(self, gauss3, schottky):
        for ifs in (gauss3, schottky):
            for n in (1, 2, 5):
                w, mu = orbit_weights(ifs, SpectralParams(0.0), n)
                assert len(w) == len(mu) == count_words(ifs.A, n, "cyclic")
                assert np.allclose(w, 1.0)

    def test_matches_matrix_traces(self, gauss2):
        p = SpectralParams(0.8, 3.0)
        T = build_matrix(gauss2, p, CollocationScheme(40, "circle")).matrix
        P = np.eye(len(T))
        for n in range(1, 7):
            P = P @ T
            assert flat_trace(gauss2, p, n) == pytest.approx(np.trace(P), rel=1e-10, abs=1e-13)

    def test_bad_n(self, gauss2):
        with pytest.raises(ValueError):
            flat_trace(gauss2, SpectralParams(1.0), 0)


class TestDeterminant:
    def test_at_zero(self, gauss2):
        assert dynamical_determinant(gauss2, SpectralParams(1.0), 0.0).value == 1.0

    @pytest.mark.parametrize("name", ["gauss2", "schottky"])
    def test_matches_matrix(self, name, request):
        ifs = request.getfixturevalue(name)
        for s, z in DET_GRID:
            p = SpectralParams.from_s(s)
            sc = CollocationScheme(40, "circle") if abs(p.b) < 5 else CollocationScheme(48)
            T = build_matrix(ifs, p, sc)
            z = min(z, 0.8 / np.max(np.abs(np.linalg.eigvals(T.matrix))))
            d = dynamical_determinant(ifs, p, z, 12)
            assert abs(d.value - matrix_determinant(T, z)) < 1e-6
            assert not d.diverging

    def test_zero_at_inverse_eigenvalue(self, gauss2):
        p = SpectralParams(0.6)
        lam = spectrum(gauss2, p, M=40, kind="circle").eigenvalues[0].real
        assert abs(dynamical_determinant(gauss2, p, 1 / lam, 14).value) < 1e-4

    def test_newton_identities(self):
        # traces of diag(0.5, 0.25): det(1 - zT) = (1 - z/2)(1 - z/4)
        traces = [0.5**n + 0.25**n for n in range(1, 6)]
        c = determinant_coefficients(traces)
        assert np.allclose(c[:3], [1, -0.75, 0.125])
        assert np.allclose(c[3:], 0, atol=1e-15)

    def test_n_max(self, gauss2):
        with pytest.raises(ValueError):
            dynamical_determinant(gauss2, SpectralParams(1.0), 0.5, 3)
