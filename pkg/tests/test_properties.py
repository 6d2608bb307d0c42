#!/usr/bin/env python3
"""
Randomized property checks on seeded inputs
"""

import sys
import unittest
from pathlib import Path

import numpy as np

# Add project root to path for imports
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from tractlab_base import BoundCheck, avoid_values, make_t_grid, relative_difference
from tractlab_geometry import CATALOG_NAMES, ParameterBox, SurfaceChart, catalog_surface
from tractlab_levelset import LevelSet, Polyline, make_polyline_levelset, segment_lengths, weighted_length
from tractlab_spectra import (FrequencySpec, fundamental_frequency, n_mean_exact, n_mean_lower_bound,
                              reduced_frequency, weighted_shift, yau_lower_bound)

TRIALS = 50


class TestBaseProperties(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(20240611)

    def test_bound_check_slack(self):
        for _ in range(TRIALS):
            lhs, rhs = self.rng.normal(size=2) * 10
            rel_tol, abs_tol = self.rng.uniform(0.0, 0.1, size=2)
            slack = max(rel_tol * abs(rhs), abs_tol)
            upper = BoundCheck("p", lhs, rhs, "<=", rel_tol=rel_tol, abs_tol=abs_tol)
            lower = BoundCheck("p", rhs, lhs, ">=", rel_tol=rel_tol, abs_tol=abs_tol)
            self.assertEqual(upper.satisfied, lhs <= rhs + slack)
            self.assertEqual(lower.satisfied, rhs >= lhs - max(rel_tol * abs(lhs), abs_tol))

    def test_non_finite_sides_fail(self):
        for value in (np.inf, -np.inf, np.nan):
            self.assertFalse(BoundCheck("p", value, 1.0, "<=").satisfied)
            self.assertFalse(BoundCheck("p", 1.0, value, ">=").satisfied)

    def test_t_grid_is_increasing(self):
        for _ in range(TRIALS):
            start = self.rng.uniform(0.1, 10.0)
            stop = start + self.rng.uniform(0.1, 100.0)
            num = int(self.rng.integers(2, 60))
            for spacing in ("log", "linear"):
                grid = make_t_grid(start, stop, num, spacing)
                self.assertEqual(grid.size, num)
                self.assertTrue(np.all(np.diff(grid) > 0))
                self.assertAlmostEqual(grid[0], start)
                self.assertAlmostEqual(grid[-1], stop)

    def test_invalid_t_grids(self):
        with self.assertRaises(ValueError):
            make_t_grid(2.0, 1.0, 5)
        with self.assertRaises(ValueError):
            make_t_grid(0.0, 1.0, 5, "log")
        with self.assertRaises(ValueError):
            make_t_grid(1.0, 2.0, 5, "cubic")

    def test_relative_difference(self):
        self.assertEqual(relative_difference(0.0, 0.0), 0.0)
        for _ in range(TRIALS):
            a, b = self.rng.normal(size=2)
            d = relative_difference(a, b)
            self.assertEqual(d, relative_difference(b, a))
            self.assertGreaterEqual(d, 0.0)
            self.assertLessEqual(d, 2.0)

    def test_avoid_values_clearance(self):
        for _ in range(TRIALS):
            grid = np.sort(self.rng.uniform(0.0, 10.0, size=30))
            critical = self.rng.uniform(0.0, 10.0, size=3)
            kept = avoid_values(grid, critical, 0.2)
            if kept.size:
                self.assertGreater(np.min(np.abs(kept[:, None] - critical[None, :])), 0.2)
            self.assertTrue(set(kept).issubset(set(grid)))


class TestGeometryProperties(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(7)

    def test_wrap_lands_in_box(self):
        box = ParameterBox(0.0, 2 * np.pi, -3.0, 3.0, periodic_u=True)
        u = self.rng.uniform(-50.0, 50.0, size=200)
        v = self.rng.uniform(-3.0, 3.0, size=200)
        wu, wv = box.wrap(u, v)
        self.assertTrue(np.all((wu >= 0.0) & (wu < 2 * np.pi + 1e-12)))
        np.testing.assert_allclose(np.cos(wu), np.cos(u), atol=1e-9)
        np.testing.assert_array_equal(wv, v)
        self.assertTrue(np.all(box.contains(wu, wv)))

    def test_polyline_length_on_plane(self):
        plane = catalog_surface("plane")
        for _ in range(TRIALS):
            n = int(self.rng.integers(3, 40))
            u = np.cumsum(self.rng.uniform(0.01, 1.0, size=n))
            v = self.rng.normal(size=n)
            levelset = make_polyline_levelset(plane, u, v, closed=False)
            expected = np.sum(np.hypot(np.diff(u), np.diff(v)))
            self.assertAlmostEqual(float(weighted_length(levelset)[0]), expected, places=9)


class TestSpectralProperties(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(11)
        self.plane = catalog_surface("plane")

    def random_arc(self):
        n = int(self.rng.integers(5, 60))
        u = np.cumsum(self.rng.uniform(0.01, 0.5, size=n))
        return make_polyline_levelset(self.plane, u, 0.3 * self.rng.normal(size=n), closed=False)

    def test_n_means_of_arcs(self):
        for _ in range(TRIALS):
            arc = self.random_arc()
            means = [n_mean_lower_bound(arc, None, N) for N in range(1, 6)]
            self.assertTrue(np.all(np.diff(means) > 0.0))
            for N, mean in enumerate(means, start=1):
                self.assertAlmostEqual(mean, n_mean_exact(arc, None, N), places=9)

    def test_weighted_shift_bracketed(self):
        for _ in range(TRIALS):
            n = int(self.rng.integers(2, 30))
            phi = self.rng.normal(size=n)
            theta = self.rng.uniform(0.1, 2.0, size=n)
            weights = self.rng.uniform(0.1, 1.0, size=n)
            alpha = float(self.rng.uniform(1.2, 4.0))
            xi = weighted_shift(phi, theta, weights, alpha)
            self.assertGreaterEqual(xi, phi.min() - 1e-12)
            self.assertLessEqual(xi, phi.max() + 1e-12)
            shifted = weighted_shift(phi + 5.0, theta, weights, alpha)
            self.assertAlmostEqual(shifted, xi + 5.0, places=6)

    def test_weighted_shift_mean_for_alpha_two(self):
        for _ in range(TRIALS):
            phi = self.rng.normal(size=10)
            theta = self.rng.uniform(0.1, 2.0, size=10)
            weights = self.rng.uniform(0.1, 1.0, size=10)
            self.assertAlmostEqual(weighted_shift(phi, theta, weights, 2.0),
                                   np.average(phi, weights=theta * weights))


def catalog_chart(name: str) -> SurfaceChart:
    return catalog_surface(name, profile="paraboloid") if name == "graph" else catalog_surface(name)


class TestCatalogFrequencyProperties(unittest.TestCase):
    """Frequency properties on random curves of every catalog surface"""

    def setUp(self):
        self.rng = np.random.default_rng(31)
        self.charts = [catalog_chart(name) for name in CATALOG_NAMES]

    def inner_point(self, chart: SurfaceChart):
        box = chart.box
        u = self.rng.uniform(box.u0 + 0.1 * box.width, box.u1 - 0.1 * box.width)
        v = self.rng.uniform(box.v0 + 0.1 * box.height, box.v1 - 0.1 * box.height)
        return u, v

    def random_arc(self, chart: SurfaceChart, n: int = 200) -> Polyline:
        (ua, va), (ub, vb) = self.inner_point(chart), self.inner_point(chart)
        s = np.linspace(0.0, 1.0, n)
        return Polyline(ua + s * (ub - ua), va + s * (vb - va), closed=False)

    def random_cycle(self, chart: SurfaceChart, n: int = 200) -> Polyline:
        cu, cv = self.inner_point(chart)
        r = 0.05 * min(chart.box.width, chart.box.height) * self.rng.uniform(0.5, 1.5)
        s = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        return make_polyline_levelset(chart, cu + r * np.cos(s), cv + r * np.sin(s), closed=True).components[0]

    def arc_position(self, chart: SurfaceChart, comp: Polyline) -> np.ndarray:
        s = np.concatenate([[0.0], np.cumsum(segment_lengths(chart, comp))])
        return s / s[-1]

    def test_reduced_frequency_under_sub_arcs(self):
        for chart in self.charts:
            for _ in range(TRIALS // 5):
                arc = self.random_arc(chart)
                i = int(self.rng.integers(0, 100))
                j = int(self.rng.integers(i + 3, len(arc) + 1))
                sub = Polyline(arc.u[i:j], arc.v[i:j], closed=False)
                full_value = reduced_frequency(LevelSet(chart, 0.0, [arc]), None)
                sub_value = reduced_frequency(LevelSet(chart, 0.0, [sub]), None)
                self.assertGreaterEqual(sub_value, full_value * (1 - 1e-12), chart.name)

    def test_reduced_frequency_under_component_removal(self):
        for chart in self.charts:
            for _ in range(TRIALS // 5):
                comps = [self.random_arc(chart), self.random_arc(chart)]
                if self.rng.uniform() < 0.5:
                    comps.append(self.random_cycle(chart))
                value = reduced_frequency(LevelSet(chart, 0.0, comps), None)
                for k in range(len(comps)):
                    rest = LevelSet(chart, 0.0, comps[:k] + comps[k + 1:])
                    self.assertGreaterEqual(reduced_frequency(rest, None), value, chart.name)

    def test_n_means_non_decreasing(self):
        for chart in self.charts:
            for _ in range(TRIALS // 5):
                comps = [self.random_arc(chart)]
                comps.extend(self.random_cycle(chart) for _ in range(int(self.rng.integers(0, 3))))
                levelset = LevelSet(chart, 0.0, comps)
                means = [n_mean_lower_bound(levelset, None, N) for N in range(1, 9)]
                self.assertTrue(np.all(np.diff(means) >= 0.0), (chart.name, means))

    def test_yau_bound_below_arc_frequency(self):
        for chart in self.charts:
            for _ in range(TRIALS // 5):
                arc = self.random_arc(chart, n=400)
                levelset = LevelSet(chart, 0.0, [arc])
                x = self.arc_position(chart, arc)
                # |sin k.| <= k sin on [0, pi] keeps f positive
                a2, a3 = self.rng.uniform(-0.15, 0.15, size=2)
                f = self.rng.uniform(0.05, 1.0) + np.sin(np.pi * x) + a2 * np.sin(2 * np.pi * x) \
                    + a3 * np.sin(3 * np.pi * x)
                lam = fundamental_frequency(levelset, FrequencySpec(theta=None)).lam
                self.assertLessEqual(yau_lower_bound(levelset, 0, None, 2.0, f), 1.02 * lam ** 2, chart.name)

    def test_yau_bound_non_positive_on_cycles(self):
        for chart in self.charts:
            for _ in range(TRIALS // 5):
                cycle = self.random_cycle(chart)
                x = self.arc_position(chart, cycle)
                a, b = self.rng.uniform(-0.4, 0.4, size=2)
                phase = self.rng.uniform(0.0, 2 * np.pi)
                f = 1.0 + a * np.cos(2 * np.pi * x + phase) + b * np.cos(4 * np.pi * x)
                self.assertLessEqual(yau_lower_bound(LevelSet(chart, 0.0, [cycle]), 0, None, 2.0, f), 1e-12,
                                     chart.name)


if __name__ == '__main__':
    unittest.main()
