import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import DIM_ORACLE, GOLDEN
from ruelle.ifs import BranchMap, Interval, MobiusMap, Word, build_gauss_ifs, make_ifs
from ruelle.phase import (Arc, PhasePoint, arc_image, arcs_disjoint, box_count_2d, canonical_apply,
                          canonical_apply_array, captivity_check_boxes, captivity_check_mobius, escape_radius,
                          eta_inverse, eta_transform, find_captive_depth, local_escape_radius, max_tau_prime,
                          phase_dim_estimate, subtract_interval, trapped_boxes, trapped_set_points,
                          zeta_branch_eval)
from ruelle.potentials import gkw_tau_prime, zero


class TestCanonicalMap:
    def test_one_branch(self, gauss1):
        tp = gkw_tau_prime(gauss1)
        x, xi = 0.6, 0.3
        q = canonical_apply(gauss1, tp, (0, 0), PhasePoint(x, xi))
        x1 = 1 / (1 + x)
        assert q.x == pytest.approx(x1)
        assert q.xi == pytest.approx(-xi * (1 + x) ** 2 + float(tp(np.array([x1]), 0, 0)[0]))

    def test_gauss_roof_derivative(self, gauss3):
        # inverse branch 1/x' - j gives tau'(x') = -2/x' on every Gauss branch
        tp = gkw_tau_prime(gauss3)
        x = np.linspace(0.3, 0.9, 7)
        for i in range(3):
            for j in range(3):
                assert np.allclose(tp(x, i, j), -2 / x, rtol=1e-14)

    def test_outside(self, gauss2):
        with pytest.raises(ValueError):
            canonical_apply(gauss2, gkw_tau_prime(gauss2), (0, 0), PhasePoint(0.1, 0.0))

    @pytest.mark.parametrize("name", ["gauss2", "gauss3", "schottky"])
    def test_escape(self, name, request):
        ifs = request.getfixturevalue(name)
        tp = gkw_tau_prime(ifs)
        R = local_escape_radius(ifs, tp)
        assert R <= escape_radius(ifs, tp) * (1 + 1e-12)
        rng = np.random.default_rng(0)
        for br in ifs.branches:
            iv = ifs.intervals[br.source]
            x = rng.uniform(iv.lo, iv.hi, 200)
            xi = R * rng.choice([-1, 1], 200) * rng.uniform(1.0, 50.0, 200)
            _, xi1 = canonical_apply_array(ifs, tp, br.source, br.target, x, xi)
            assert np.all(np.abs(xi1) > 1.02 * np.abs(xi))

    def test_kappa_range(self, gauss2):
        with pytest.raises(ValueError):
            escape_radius(gauss2, gkw_tau_prime(gauss2), kappa=1 / gauss2.theta)
        with pytest.raises(ValueError):
            local_escape_radius(gauss2, gkw_tau_prime(gauss2), kappa=1.0)


class TestEta:
    @given(st.floats(0.1, 0.9), st.floats(0.01, 50) | st.floats(-50, -0.01), st.sampled_from([-1, 1]))
    def test_roundtrip(self, x, xi, D):
        q = eta_inverse(x, eta_transform(PhasePoint(x, xi), D), D)
        assert q.xi == pytest.approx(xi, rel=1e-9)

    def test_zero_section(self):
        with pytest.raises(ZeroDivisionError):
            eta_transform(PhasePoint(0.5, 0.0), 1)
        with pytest.raises(ZeroDivisionError):
            eta_inverse(0.5, 0.5, 1)

    @pytest.mark.parametrize("name", ["gauss3", "schottky"])
    def test_decoupling(self, name, request):
        # in the eta coordinate the canonical map acts by the branch itself
        ifs = request.getfixturevalue(name)
        tp = gkw_tau_prime(ifs)
        for br in ifs.branches:
            iv = ifs.intervals[br.source]
            D = int(np.sign(br.mobius.det))
            x = np.linspace(iv.lo, iv.hi, 5)[1:-1]
            xi = np.array([0.37, -1.3, 4.0])
            x1, xi1 = canonical_apply_array(ifs, tp, br.source, br.target, x, xi)
            assert np.allclose(x1 - 2 * D / xi1, br.mobius(x - 2 * D / xi), rtol=1e-11)


class TestTrappedSet:
    def test_band(self, gauss3):
        tp = gkw_tau_prime(gauss3)
        for p in range(1, 7):
            pts = trapped_set_points(gauss3, tp, p)
            assert np.all((pts.xi < 0) & (pts.xi > -2 / (1 + pts.x)))

    def test_zero_roof(self, gauss3):
        pts = trapped_set_points(gauss3, zero, 4)
        assert np.all(pts.xi == 0)

    def test_golden_closed_form(self, gauss1):
        # sum_{k>=1} (-G^2)^k = -G^2 / (1 + G^2), times -tau'(G) = 2/G
        expect = -2 * GOLDEN / (1 + GOLDEN**2)
        tp = gkw_tau_prime(gauss1)
        assert trapped_set_points(gauss1, tp, 1).xi[0] == pytest.approx(expect, rel=1e-13)
        z = zeta_branch_eval(gauss1, tp, Word((0,), "cyclic"), GOLDEN, n=60)
        assert z.value == pytest.approx(expect, rel=1e-12)

    def test_truncation_bound(self, gauss3):
        tp = gkw_tau_prime(gauss3)
        word = Word((0, 2, 1), "cyclic")
        x = trapped_set_points(gauss3, tp, 3)
        k = [tuple(w) for w in x.words].index((0, 2, 1))
        for n in (3, 6, 9):
            z = zeta_branch_eval(gauss3, tp, word, float(x.x[k]), n)
            assert abs(z.value - x.xi[k]) <= z.error_bound

    def test_invariance(self, system):
        # (x, zeta) of a periodic word maps to (x, zeta) of the rotated word
        tp = gkw_tau_prime(system)
        pts = trapped_set_points(system, tp, 5)
        index = {tuple(w): k for k, w in enumerate(pts.words)}
        W = pts.words
        x1, xi1 = canonical_apply_array(system, tp, W[:, -1], W[:, 0], pts.x, pts.xi)
        rot = [index[tuple(np.roll(w, -1))] for w in W]
        assert np.allclose(x1, pts.x[rot], atol=1e-13)
        assert np.allclose(xi1, pts.xi[rot], atol=1e-11)

    @given(st.lists(st.integers(0, 3), min_size=9, max_size=9), st.floats(0.0, 1.0))
    def test_commutation(self, syms, t):
        # F carries the zeta curve of v over x to the zeta curve of the shifted word over phi(x)
        from ruelle.ifs import build_example_schottky
        ifs = build_example_schottky()
        path = [syms[0]]
        for s in syms[1:]:
            path.append(s if ifs.A[path[-1], s] else (s + 1) % 4)
        tp = gkw_tau_prime(ifs)
        iv = ifs.intervals[path[0]]
        x = iv.lo + t * (iv.hi - iv.lo)
        z = zeta_branch_eval(ifs, tp, Word(tuple(path)), x, 8)
        q = canonical_apply(ifs, tp, (path[0], path[1]), PhasePoint(x, z.value))
        z1 = zeta_branch_eval(ifs, tp, Word(tuple(path[1:])), q.x, 7)
        assert abs(q.xi - z1.value) <= 1e-10 + z.error_bound

    def test_inadmissible_future(self, schottky):
        with pytest.raises(ValueError):
            zeta_branch_eval(schottky, gkw_tau_prime(schottky), Word((0, 2)), 0.55)


def boxes_nested(inner, outer):
    """Every inner box sits in some outer box (x-cylinders are disjoint, so match on the cylinder first)."""
    starts = np.unique(outer[:, 0])
    for lo in np.unique(inner[:, 0]):
        rows = inner[inner[:, 0] == lo]
        parent_lo = starts[np.searchsorted(starts, lo, "right") - 1]
        par = outer[outer[:, 0] == parent_lo]
        if np.any(rows[:, 1] > par[0, 1]):
            return False
        ok = (par[None, :, 2] <= rows[:, None, 2]) & (rows[:, None, 3] <= par[None, :, 3])
        if not ok.any(axis=1).all():
            return False
    return True


class TestCaptivity:
    @pytest.mark.parametrize("N", [1, 2, 3])
    def test_gauss_captive(self, N):
        ifs = build_gauss_ifs(N)
        v = find_captive_depth(ifs, gkw_tau_prime(ifs))
        assert v.captive and v.depth <= 8 and v.max_multiplicity <= 1

    def test_schottky_captive(self, schottky):
        v = find_captive_depth(schottky, gkw_tau_prime(schottky))
        assert v.captive and v.depth == 1
        assert v.certificate()["status"] == "captive"

    def test_shallow_violation_is_not_final(self, gauss2):
        tp = gkw_tau_prime(gauss2)
        assert captivity_check_boxes(gauss2, tp, 1).status == "violated"
        assert find_captive_depth(gauss2, tp).depth == 3

    def test_zero_roof_violated(self, gauss2):
        v = find_captive_depth(gauss2, zero)
        assert v.status == "violated"
        x, xi = v.witness
        assert xi == 0.0 and gauss2.locate(np.array([x]))[0] >= 0
        assert v.details["branches_hit"] >= 2

    def test_uniform_radius_is_coarser(self, gauss3):
        tp = gkw_tau_prime(gauss3)
        assert escape_radius(gauss3, tp) > local_escape_radius(gauss3, tp)

    def test_depth(self, gauss2):
        with pytest.raises(ValueError):
            captivity_check_boxes(gauss2, gkw_tau_prime(gauss2), 0)

    @pytest.mark.parametrize("name, top", [("gauss2", 5), ("schottky", 5)])
    def test_nesting(self, name, top, request):
        # K_{a+1,b} and K_{a,b+1} both lie inside K_{a,b}
        ifs = request.getfixturevalue(name)
        tp = gkw_tau_prime(ifs)
        boxes = {(a, b): trapped_boxes(ifs, tp, a, b) for a in range(1, top + 1) for b in range(0, top + 1)}
        for (a, b), outer in boxes.items():
            for inner in (boxes.get((a + 1, b)), boxes.get((a, b + 1))):
                if inner is not None:
                    assert boxes_nested(inner, outer), (a, b)
    def test_boxes_contain_trapped_points(self, gauss3):
        tp = gkw_tau_prime(gauss3)
        boxes = trapped_boxes(gauss3, tp, 3, 3)
        pts = trapped_set_points(gauss3, tp, 6)
        for x, xi in zip(pts.x, pts.xi):
            inside = (boxes[:, 0] <= x) & (x <= boxes[:, 1]) & (boxes[:, 2] <= xi) & (xi <= boxes[:, 3])
            assert inside.any()


class TestMobiusCaptivity:
    def test_builtins(self, gauss3, schottky):
        for ifs in (gauss3, schottky):
            assert captivity_check_mobius(ifs).captive

    def test_agrees_with_boxes(self, gauss2, schottky):
        for ifs in (gauss2, schottky):
            assert captivity_check_mobius(ifs).captive == find_captive_depth(ifs, gkw_tau_prime(ifs)).captive

    def test_enlarged_basin(self, gauss3):
        v = captivity_check_mobius(gauss3, Arc(-math.inf, 0.0))
        assert v.status == "violated" and len(v.details["overlap"]) == 2

    def test_arcs(self):
        assert arcs_disjoint(Arc(0, 1), Arc(2, 3))
        assert not arcs_disjoint(Arc(0, 2), Arc(1, 3))
        # wraps through infinity
        assert not arcs_disjoint(Arc(5, -5), Arc(10, 11))
        assert arcs_disjoint(Arc(5, -5), Arc(0, 1))
        flip = arc_image(MobiusMap(0, 1, 1, 0), Arc(1, 2))
        assert (flip.start, flip.end) == pytest.approx((0.5, 1.0))
        assert subtract_interval(Arc(0, 3), Interval(1, 2)) == [Arc(0, 1), Arc(2, 3)]

    def test_needs_mobius(self):
        ifs = make_ifs([Interval(0, 1)], [[1]], [BranchMap(0, 0, func=lambda y: 0.5 * y + 0.25, deriv=lambda y: 0.5 + 0 * y)],
                       theta=0.5, check=False)
        with pytest.raises(ValueError):
            captivity_check_mobius(ifs)


class TestPhaseDimension:
    def test_grid_count(self):
        x = np.array([0.0, 0.1, 0.6, 0.61])
        assert box_count_2d(x, np.zeros(4), 0.5) == 2
        assert box_count_2d(x, np.zeros(4), 0.5, 0.25) == 2

    def test_single_orbit(self, gauss1):
        assert phase_dim_estimate(gauss1, gkw_tau_prime(gauss1), depth=12) == 0.0

    @pytest.mark.parametrize("name", ["gauss2", "schottky"])
    def test_twice_dimension(self, name, request):
        ifs = request.getfixturevalue(name)
        est = phase_dim_estimate(ifs, gkw_tau_prime(ifs))
        assert est == pytest.approx(2 * DIM_ORACLE[name], abs=0.05)

    def test_asymmetric(self):
        g = MobiusMap(0.0, 1.0, 1.0, 3.0)
        ifs = make_ifs([Interval(0.2, 0.4), Interval(0.6, 0.8)], [[1, 1], [0, 1]],
                       [BranchMap(0, 0, g), BranchMap(0, 1, g), BranchMap(1, 1, g)], theta=0.5, check=False)
        with pytest.raises(ValueError):
            phase_dim_estimate(ifs, zero, depth=8)

    def test_max_tau_prime(self, gauss3):
        # |tau'| = 2/x' peaks at the left end of the images, just above 1/4
        assert 7.0 < max_tau_prime(gauss3, gkw_tau_prime(gauss3)) < 8.0
