#!/usr/bin/env python3
"""
Unit tests for level-set extraction and superlevel components
"""

import sys
import unittest
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

# Add project root to path for imports
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from tractlab_base import LevelSetError
from tractlab_geometry import (ParameterBox, SampleGrid, box_for_radius, catalog_surface, coordinate_field,
                               custom_field, norm_field)
from tractlab_levelset import (
    crossed_cells,
    extract_level_set,
    gradient_decomposition_residual,
    is_nested,
    make_polyline_levelset,
    maximum_on_ring,
    periodic_label,
    restrict_level_set,
    superlevel_components,
    weighted_length,
)


class TestExtraction(unittest.TestCase):
    """Test level curves of exhaustion and coordinate functions"""

    def setUp(self):
        self.catenoid = catalog_surface("catenoid")
        self.grid = SampleGrid(self.catenoid, 128, 200)
        self.h = norm_field(self.catenoid)

    def test_catenoid_sphere_is_two_cycles(self):
        levelset = extract_level_set(self.h, 5.0, self.grid)
        self.assertEqual(levelset.n_cycles, 2)
        self.assertEqual(levelset.n_open, 0)
        v0 = brentq(lambda v: np.cosh(v) ** 2 + v ** 2 - 25.0, 0.0, 3.0)
        lengths = weighted_length(levelset)
        np.testing.assert_allclose(lengths, 2 * np.pi * np.cosh(v0), rtol=1e-3)

    def test_vertices_lie_on_level(self):
        levelset = extract_level_set(self.h, 4.0, self.grid)
        u, v = levelset.vertices()
        np.testing.assert_allclose(self.h.values(u, v), 4.0, atol=1e-6)

    def test_plane_line_is_open_arc(self):
        plane = catalog_surface("plane")
        levelset = extract_level_set(coordinate_field(plane, [1, 0, 0]), 0.3, SampleGrid(plane, 40, 40))
        self.assertEqual(levelset.n_open, 1)
        self.assertTrue(levelset.components[0].touches_boundary)
        self.assertAlmostEqual(float(weighted_length(levelset)[0]), 2.0, places=6)

    def test_empty_level(self):
        levelset = extract_level_set(self.h, 500.0, self.grid)
        self.assertTrue(levelset.is_empty)
        with self.assertRaises(LevelSetError):
            weighted_length(levelset)

    def test_near_critical_level_raises(self):
        # odd nv puts nodes on the waist, where |x| = 1 is critical
        grid = SampleGrid(self.catenoid, 64, 61)
        with self.assertRaises(LevelSetError) as ctx:
            extract_level_set(self.h, 1.0, grid)
        self.assertEqual(ctx.exception.level, 1.0)

    def test_gradient_decomposition(self):
        levelset = extract_level_set(self.h, 3.0, self.grid)
        residual = gradient_decomposition_residual(levelset, coordinate_field(self.catenoid, [1, 0, 0]))
        self.assertLess(residual, 1e-8)

    def test_crossed_cells(self):
        levelset = extract_level_set(self.h, 3.0, self.grid)
        mask = crossed_cells(levelset, self.grid)
        self.assertEqual(mask.shape, self.grid.cell_shape)
        # each cycle runs once around the periodic direction
        self.assertGreaterEqual(int(mask.sum()), 128)
        self.assertLess(int(mask.sum()), mask.size // 4)

    def test_polyline_closing_vertex(self):
        s = np.linspace(0.0, 2 * np.pi, 50, endpoint=False)
        levelset = make_polyline_levelset(catalog_surface("plane"), np.cos(s), np.sin(s), closed=True)
        comp = levelset.components[0]
        self.assertEqual(len(comp), 51)
        self.assertEqual(comp.kind, "cyclic")


class TestSuperlevelComponents(unittest.TestCase):
    """Test flood-fill labeling of superlevel sets"""

    def setUp(self):
        self.catenoid = catalog_surface("catenoid")
        self.grid = SampleGrid(self.catenoid, 128, 200)
        self.f = coordinate_field(self.catenoid, [1, 0, 0])

    def test_periodic_label_merges_across_seam(self):
        indicator = np.zeros((6, 4), dtype=bool)
        indicator[0, 1] = indicator[-1, 1] = True
        _, merged = periodic_label(indicator, (True, False))
        _, separate = periodic_label(indicator, (False, False))
        self.assertEqual(merged, 1)
        self.assertEqual(separate, 2)

    def test_catenoid_has_two_components(self):
        comps = superlevel_components(self.f, 2.0, self.grid)
        self.assertEqual(comps.count, 2)
        self.assertEqual(comps.touches_boundary, [True, True])
        self.assertEqual(comps.compact_flags, [False, False])
        for k in range(2):
            self.assertTrue(maximum_on_ring(comps, k))

    def test_representatives_belong_to_their_component(self):
        comps = superlevel_components(self.f, 2.0, self.grid)
        for k, (u, v) in enumerate(comps.representatives):
            self.assertEqual(int(comps.label_at(u, v)), k)

    def test_nesting(self):
        low = superlevel_components(self.f, 2.0, self.grid)
        high = superlevel_components(self.f, 4.0, self.grid)
        self.assertTrue(is_nested(high, low))

    def test_compact_bump(self):
        plane = catalog_surface("plane", box_for_radius("plane", 2.0))
        bump = custom_field(plane, lambda u, v: 1.0 - u ** 2 - v ** 2, "bump")
        comps = superlevel_components(bump, 0.5, SampleGrid(plane, 80, 80), check_refinement=True)
        self.assertEqual(comps.count, 1)
        self.assertEqual(comps.compact_flags, [True])
        self.assertTrue(comps.resolved)
        # the interior maximum sits away from the boundary ring
        self.assertFalse(maximum_on_ring(comps, 0))

    def test_restriction_to_component(self):
        h = norm_field(self.catenoid)
        comps = superlevel_components(self.f, 2.0, self.grid)
        section = restrict_level_set(extract_level_set(h, 5.0, self.grid), comps, 0)
        self.assertEqual(section.n_cycles, 0)
        self.assertEqual(section.n_open, 1)
        arc = section.components[0]
        self.assertFalse(arc.touches_boundary)
        ends_u = np.array([arc.u[0], arc.u[-1]])
        ends_v = np.array([arc.v[0], arc.v[-1]])
        np.testing.assert_allclose(self.f.values(ends_u, ends_v), 2.0, atol=1e-6)
        np.testing.assert_allclose(h.values(ends_u, ends_v), 5.0, atol=1e-6)

    def test_plane_single_tract_component(self):
        plane = catalog_surface("plane", ParameterBox(-10.0, 10.0, -10.0, 10.0))
        comps = superlevel_components(coordinate_field(plane, [1, 0, 0]), 2.0, SampleGrid(plane, 100, 100))
        self.assertEqual(comps.count, 1)
        self.assertTrue(comps.touches_boundary[0])


if __name__ == '__main__':
    unittest.main()
