#!/usr/bin/env python3
"""
Unit tests for Dirichlet integrals, flows, capacities and the singular terms
"""

import sys
import unittest
from pathlib import Path

import numpy as np

# Add project root to path for imports
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from tractlab_base import CapacityError, FlowError
from tractlab_energy import (
    SurfaceQuadrature,
    c_alpha,
    capacity_closed_form,
    capacity_variational,
    dirichlet_capacity_check,
    dirichlet_integral,
    energy_profile,
    full_flow,
    growth_energy_check,
    max_modulus,
    singular_terms,
)
from tractlab_geometry import (SampleGrid, abs_coordinate_field, box_for_radius, catalog_surface, coordinate_field,
                               norm_field)
from tractlab_levelset import extract_level_set, superlevel_components


class TestConstants(unittest.TestCase):

    def test_c_alpha(self):
        self.assertEqual(c_alpha(2.0), 0.5)
        self.assertAlmostEqual(c_alpha(3.0), 2.0 / 3.0)
        self.assertAlmostEqual(c_alpha(1.5), 1.0 / 1.5)
        with self.assertRaises(ValueError):
            c_alpha(1.0)


class TestPlaneEnergy(unittest.TestCase):
    """Energies of a linear function on the plane"""

    def setUp(self):
        self.plane = catalog_surface("plane", box_for_radius("plane", 10.0))
        self.grid = SampleGrid(self.plane, 200, 200)
        self.f = coordinate_field(self.plane, [1, 0, 0])
        self.h = norm_field(self.plane)
        self.quadrature = SurfaceQuadrature(self.grid)

    def test_disk_energy(self):
        for t in (2.0, 5.0, 8.0):
            J = dirichlet_integral(self.f, 2.0, self.quadrature, h=self.h, t=t)
            self.assertAlmostEqual(J, np.pi * t ** 2, delta=0.01 * np.pi * t ** 2)

    def test_whole_chart(self):
        self.assertAlmostEqual(dirichlet_integral(self.f, 3.0, self.quadrature), 400.0, places=6)

    def test_flow_of_norm_is_not_constant(self):
        with self.assertRaises(FlowError) as ctx:
            full_flow(self.h, [2.0, 4.0, 6.0], self.grid)
        self.assertEqual(len(ctx.exception.values), 3)

    def test_max_modulus(self):
        levelset = extract_level_set(self.h, 3.0, self.grid)
        self.assertAlmostEqual(max_modulus(self.f, levelset), 3.0, delta=1e-3)
        self.assertEqual(max_modulus(self.f, levelset, floor=7.0), 7.0)

    def test_growth_energy_bound(self):
        check = growth_energy_check(self.f, self.h, 2.0, 8.0, 2.0, self.grid, quadrature=self.quadrature)
        self.assertTrue(check.satisfied)
        self.assertLess(check.lhs, check.rhs)

    def test_dirichlet_capacity_bound(self):
        comps = superlevel_components(self.f, 2.0, self.grid)
        check = dirichlet_capacity_check(self.f, self.h, comps, 0, 4.0, 8.0, 2.0, self.grid, self.quadrature)
        self.assertTrue(check.satisfied)

    def test_profile_monotone(self):
        profile = energy_profile(self.f, self.h, np.linspace(2.0, 8.0, 7), self.grid, quadrature=self.quadrature)
        self.assertTrue(np.all(np.diff(profile.J) > 0.0))
        np.testing.assert_allclose(profile.M, profile.t_grid, rtol=1e-3)
        self.assertIsNone(profile.S_h)
        self.assertEqual(len(profile.rows()), 7)


class TestTubularFlows(unittest.TestCase):
    """Flows and singular terms of the catenoid sliced by |x_3|"""

    def setUp(self):
        self.catenoid = catalog_surface("catenoid")
        self.grid = SampleGrid(self.catenoid, 128, 200)
        self.h = abs_coordinate_field(self.catenoid, [0, 0, 1])
        self.t_grid = np.linspace(0.5, 2.5, 9)

    def test_full_flow(self):
        S = full_flow(self.h, self.t_grid, self.grid)
        self.assertAlmostEqual(S, 4 * np.pi, delta=1e-3 * 4 * np.pi)

    def test_capacity_closed_form_matches_variational(self):
        S = full_flow(self.h, self.t_grid, self.grid)
        closed = capacity_closed_form(S, 1.0, 2.0, 2.0)
        variational = capacity_variational(self.h, 1.0, 2.0, 2.0, SurfaceQuadrature(self.grid))
        self.assertAlmostEqual(closed, 4 * np.pi, delta=0.01 * 4 * np.pi)
        self.assertAlmostEqual(variational, closed, delta=0.02 * closed)

    def test_capacity_closed_form_cubic(self):
        self.assertAlmostEqual(capacity_closed_form(4 * np.pi, 1.0, 3.0, 3.0), (2 * np.pi) ** 2, places=9)
        self.assertAlmostEqual(capacity_closed_form(4 * np.pi, 0.0, 4 * np.pi, 2.0), 1.0, places=12)
        self.assertAlmostEqual(capacity_closed_form(4 * np.pi, 1.0, 3.0, 2.0), 2 * np.pi, places=12)

    def test_catenoid_ball_energy(self):
        f = coordinate_field(self.catenoid, [1, 0, 0])
        quadrature = SurfaceQuadrature(self.grid)
        for t in (0.5, 1.0, 2.0):
            J = dirichlet_integral(f, 2.0, quadrature, h=self.h, t=t)
            self.assertAlmostEqual(J, np.pi * np.sinh(2 * t), delta=0.01 * np.pi * np.sinh(2 * t))

    def test_capacity_needs_ordered_radii(self):
        with self.assertRaises(CapacityError):
            capacity_closed_form(1.0, 2.0, 2.0, 2.0)

    def test_odd_function_has_no_singular_terms(self):
        terms = singular_terms(coordinate_field(self.catenoid, [1, 0, 0]), self.h, self.t_grid, self.grid)
        np.testing.assert_allclose(terms.omega, 0.0, atol=1e-6)
        np.testing.assert_allclose(terms.Q, 0.0, atol=1e-5)

    def test_axis_function_singular_terms(self):
        f = coordinate_field(self.catenoid, [0, 0, 1])
        terms = singular_terms(f, self.h, self.t_grid, self.grid)
        np.testing.assert_allclose(terms.omega, 4 * np.pi, rtol=1e-3)
        np.testing.assert_allclose(terms.Q, 4 * np.pi * self.t_grid, rtol=1e-3)
        np.testing.assert_allclose(terms.Q_direct, terms.Q, rtol=1e-3)
        self.assertEqual(len(terms.cycles), 2 * self.t_grid.size)

    def test_axis_function_energy_equals_q(self):
        f = coordinate_field(self.catenoid, [0, 0, 1])
        profile = energy_profile(f, self.h, self.t_grid, self.grid, singular=True)
        np.testing.assert_allclose(profile.J, 4 * np.pi * self.t_grid, rtol=1e-2)
        np.testing.assert_allclose(profile.Q / profile.J, 1.0, rtol=1e-2)
        self.assertAlmostEqual(profile.S_h, 4 * np.pi, delta=1e-2)

    def test_open_level_rejected(self):
        with self.assertRaises(FlowError):
            singular_terms(coordinate_field(self.catenoid, [0, 0, 1]),
                           coordinate_field(self.catenoid, [1, 0, 0]), [0.5], self.grid)


if __name__ == '__main__':
    unittest.main()
