"""
Test the two-phase simplex solver
"""
import numpy as np
from django.test import SimpleTestCase
from scipy.optimize import linprog

from qemforge.simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, linprog_simplex


class TestSimplex(SimpleTestCase):
    """Test linprog_simplex on textbook and random programs."""

    def test_textbook_program(self):
        # max 3x + 5y with slacks
        a = [[1, 0, 1, 0, 0], [0, 2, 0, 1, 0], [3, 2, 0, 0, 1]]
        result = linprog_simplex([-3, -5, 0, 0, 0], a, [4, 12, 18])
        self.assertEqual(result.status, OPTIMAL)
        self.assertAlmostEqual(result.fun, -36.0)
        np.testing.assert_allclose(result.x[:2], [2, 6], atol=1e-9)

    def test_negative_right_hand_side(self):
        result = linprog_simplex([1, 1], [[-1, -1]], [-2])
        self.assertEqual(result.status, OPTIMAL)
        self.assertAlmostEqual(result.fun, 2.0)

    def test_infeasible(self):
        result = linprog_simplex([1, 1], [[1, 1]], [-1])
        self.assertEqual(result.status, INFEASIBLE)
        self.assertEqual(result.fun, np.inf)

    def test_unbounded(self):
        result = linprog_simplex([-1, 0], [[1, -1]], [1])
        self.assertEqual(result.status, UNBOUNDED)

    def test_redundant_rows(self):
        result = linprog_simplex([1, 0], [[1, 1], [1, 1], [2, 2]], [1, 1, 2])
        self.assertEqual(result.status, OPTIMAL)
        self.assertAlmostEqual(result.fun, 0.0)
        np.testing.assert_allclose(result.x, [0, 1], atol=1e-12)

    def test_degenerate_program_terminates(self):
        # Beale's cycling example; Bland's rule must reach the optimum
        c = [0, 0, 0, -0.75, 150, -0.02, 6]
        a = [
            [1, 0, 0, 0.25, -60, -0.04, 9],
            [0, 1, 0, 0.5, -90, -0.02, 3],
            [0, 0, 1, 0, 0, 1, 0],
        ]
        result = linprog_simplex(c, a, [0, 0, 1])
        self.assertEqual(result.status, OPTIMAL)
        self.assertAlmostEqual(result.fun, -0.05, places=9)

    def test_shape_mismatch(self):
        with self.assertRaises(ValueError):
            linprog_simplex([1, 1, 1], [[1, 1]], [1])

    def test_matches_scipy_on_random_programs(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            a = rng.normal(size=(6, 14))
            x0 = rng.uniform(0.1, 1.0, size=14)
            b = a @ x0
            c = rng.uniform(0.1, 2.0, size=14)
            ours = linprog_simplex(c, a, b)
            reference = linprog(c, A_eq=a, b_eq=b, bounds=(0, None), method="highs")
            self.assertEqual(ours.status, OPTIMAL)
            self.assertAlmostEqual(ours.fun, reference.fun, places=7)
            np.testing.assert_allclose(a @ ours.x, b, atol=1e-8)
            self.assertTrue(np.all(ours.x >= -1e-12))
