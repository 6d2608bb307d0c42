#!/usr/bin/env python3
"""
Unit tests for fundamental frequencies, N-means and the Rayleigh oracle
"""

import sys
import unittest
from pathlib import Path

import numpy as np

# Add project root to path for imports
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from tractlab_base import FrequencyError
from tractlab_geometry import SampleGrid, abs_coordinate_field, catalog_surface
from tractlab_levelset import LevelSet, extract_level_set, make_polyline_levelset
from tractlab_spectra import (
    FrequencySpec,
    admissible_shift,
    frequency_rows,
    fundamental_frequency,
    n_mean_exact,
    n_mean_lower_bound,
    rayleigh_oracle,
    reduced_frequency,
    theta_integrals,
    weighted_shift,
    yau_lower_bound,
)


def unit_segment(n: int = 201) -> LevelSet:
    plane = catalog_surface("plane")
    return make_polyline_levelset(plane, np.linspace(0.0, 1.0, n), np.zeros(n), closed=False)


def unit_circle(n: int = 400) -> LevelSet:
    plane = catalog_surface("plane")
    s = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    return make_polyline_levelset(plane, np.cos(s), np.sin(s), closed=True)


class TestClosedForm(unittest.TestCase):
    """Test closed-form frequencies of arcs and cycles"""

    def test_arc(self):
        result = fundamental_frequency(unit_segment(), FrequencySpec(theta=None))
        self.assertAlmostEqual(result.lam, np.pi, places=9)
        self.assertEqual(result.kinds, ["open"])

    def test_constant_weight_scales(self):
        result = fundamental_frequency(unit_segment(), FrequencySpec(theta=2.0))
        self.assertAlmostEqual(result.lam, np.pi / 2, places=9)

    def test_cycle(self):
        result = fundamental_frequency(unit_circle(), FrequencySpec(theta=None))
        self.assertAlmostEqual(result.lam, 1.0, places=4)
        self.assertEqual(reduced_frequency(unit_circle(), None), 0.0)

    def test_invalid_inputs(self):
        with self.assertRaises(FrequencyError):
            FrequencySpec(alpha=1.0)
        with self.assertRaises(FrequencyError):
            fundamental_frequency(unit_segment(), FrequencySpec(alpha=3.0, theta=None))
        with self.assertRaises(FrequencyError):
            theta_integrals(unit_segment(), 0.0)

    def test_tubular_levels_have_unit_frequency(self):
        catenoid = catalog_surface("catenoid")
        h = abs_coordinate_field(catenoid, [0, 0, 1])
        grid = SampleGrid(catenoid, 128, 200)
        for t in (0.7, 1.5, 2.5):
            result = fundamental_frequency(extract_level_set(h, t, grid))
            self.assertEqual(result.kinds, ["cyclic", "cyclic"])
            self.assertAlmostEqual(result.lam, 1.0, delta=1e-3)


class TestNMeans(unittest.TestCase):
    """Test N-mean bounds"""

    def test_arc_bound_is_exact(self):
        segment = unit_segment()
        for N in range(1, 5):
            self.assertAlmostEqual(n_mean_lower_bound(segment, None, N), n_mean_exact(segment, None, N))

    def test_cycle_bound(self):
        circle = unit_circle()
        self.assertEqual(n_mean_lower_bound(circle, None, 1), 0.0)
        self.assertAlmostEqual(n_mean_lower_bound(circle, None, 2), 0.25, places=4)
        self.assertAlmostEqual(n_mean_exact(circle, None, 2), 1.0, places=4)
        for N in range(1, 6):
            self.assertLessEqual(n_mean_lower_bound(circle, None, N), n_mean_exact(circle, None, N) + 1e-12)

    def test_non_decreasing_in_n(self):
        circle = unit_circle()
        means = [n_mean_lower_bound(circle, None, N) for N in range(1, 8)]
        self.assertTrue(np.all(np.diff(means) >= 0.0))

    def test_invalid_n(self):
        with self.assertRaises(FrequencyError):
            n_mean_lower_bound(unit_segment(), None, 0)


class TestOracle(unittest.TestCase):
    """Test the finite-element Rayleigh quotient against closed forms"""

    def test_arc_oracle(self):
        self.assertAlmostEqual(rayleigh_oracle(unit_segment(), None), np.pi, delta=1e-3)

    def test_cycle_oracle(self):
        self.assertAlmostEqual(rayleigh_oracle(unit_circle(), None), 1.0, delta=1e-3)

    def test_weighted_arc_oracle(self):
        self.assertAlmostEqual(rayleigh_oracle(unit_segment(), 3.0), np.pi / 3, delta=1e-3)

    def test_randomized_closed_form_agreement(self):
        rng = np.random.default_rng(2024)
        plane = catalog_surface("plane")
        for case in range(10):
            length = float(rng.uniform(0.5, 5.0))
            theta = float(rng.uniform(0.5, 3.0))
            if case % 2:
                r = length / (2 * np.pi)
                s = np.linspace(0.0, 2 * np.pi, 400, endpoint=False)
                levelset = make_polyline_levelset(plane, r * np.cos(s), r * np.sin(s), closed=True)
            else:
                levelset = make_polyline_levelset(plane, np.linspace(0.0, length, 201), np.zeros(201), closed=False)
            closed = fundamental_frequency(levelset, FrequencySpec(theta=theta)).lam
            oracle = rayleigh_oracle(levelset, theta, n=256)
            self.assertAlmostEqual(oracle, closed, delta=1e-3 * closed, msg=f"case {case}")

    def test_mesh_too_small(self):
        with self.assertRaises(FrequencyError):
            rayleigh_oracle(unit_segment(), None, n=8)

    def test_frequency_rows(self):
        rows = frequency_rows(unit_circle(), None, n=128)
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0]["kind"], "cyclic")
        self.assertAlmostEqual(rows[0]["lambda_closed"], rows[0]["lambda_oracle"], delta=1e-3)


class TestShiftsAndBounds(unittest.TestCase):
    """Test the admissible shift and the Yau-type bound"""

    def test_weighted_mean(self):
        phi = np.array([0.0, 1.0, 2.0])
        self.assertAlmostEqual(weighted_shift(phi, np.ones(3), np.array([1.0, 1.0, 2.0]), 2.0), 1.25)

    def test_symmetric_shift(self):
        phi = np.array([-1.0, 0.0, 1.0, 3.0, -3.0])
        for alpha in (1.5, 3.0, 4.0):
            self.assertAlmostEqual(weighted_shift(phi, np.ones(5), np.ones(5), alpha), 0.0, places=9)

    def test_cubic_shift_of_ramp(self):
        # phi = s on a cycle of length 1; the root of int |xi - s|(xi - s) ds = 0 is 1/2
        n = 400
        plane = catalog_surface("plane")
        r = 1.0 / (2 * np.pi)
        s = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        cycle = make_polyline_levelset(plane, r * np.cos(s), r * np.sin(s), closed=True)
        phi = np.arange(n + 1) / n
        self.assertAlmostEqual(admissible_shift(cycle, 0, phi, None, 3.0), 0.5, delta=1.0 / n)

    def test_admissible_shift_of_odd_function(self):
        circle = unit_circle()
        self.assertAlmostEqual(admissible_shift(circle, 0, lambda u, v: u, None, 2.0), 0.0, places=9)
        with self.assertRaises(FrequencyError):
            admissible_shift(unit_segment(), 0, lambda u, v: u, None, 2.0)

    def test_yau_bound(self):
        segment = unit_segment()
        k = np.pi / 1.2
        bound = yau_lower_bound(segment, 0, None, 2.0, lambda u, v: np.cos(k * (u - 0.5)))
        self.assertAlmostEqual(bound, k ** 2, delta=1e-3 * k ** 2)
        self.assertLessEqual(bound, np.pi ** 2)

    def test_yau_bound_on_cycle(self):
        circle = unit_circle()
        bound = yau_lower_bound(circle, 0, None, 2.0, lambda u, v: 2.0 + u)
        self.assertAlmostEqual(bound, -1.0, delta=1e-4)

    def test_yau_bound_needs_positive_function(self):
        with self.assertRaises(FrequencyError):
            yau_lower_bound(unit_segment(), 0, None, 2.0, lambda u, v: np.sin(np.pi * u))


if __name__ == '__main__':
    unittest.main()
