#!/usr/bin/env python3
"""
Tests for the partition-preserving integral transform.
"""

import sys
import os
import unittest
from unittest.mock import patch
import numpy as np

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from src.utils.errors import InvalidInputError, QuadratureError, RefusalError
from src.utils.fields import ScalarField, exp_abs, plateau_linear
from src.utils.matrix import SquareMatrix
from src.utils.partition import build_radial_pou, verify_partition
from src.utils.splines import build_spline, spline_field
from src.utils.transform import (QuadratureSpec, TransformSpec, field_integral, integrate, kernel_abs_sum_bound,
                                 lifted_partition, transform_1d, transform_derivative_1d, transform_dd,
                                 transform_even, transform_grid, transformed_support)

EXP_ABS_AT_1 = 2.0 * (np.exp(-1.0) - np.exp(-2.0))
EXP_ABS_AT_2 = 2.0 * (np.exp(-2.0) - np.exp(-4.0))


class TestOneDimensionalTransform(unittest.TestCase):
    """Test cases for K f in one dimension."""

    def setUp(self):
        self.f = exp_abs().even_function()

    def test_exp_abs_values(self):
        """K exp(-|t|) has the closed form 2 (exp(-x) - exp(-2x)) at c = 1/2."""
        self.assertAlmostEqual(transform_1d(self.f, 0.5, 1.0), EXP_ABS_AT_1, places=10)
        self.assertAlmostEqual(transform_1d(self.f, 0.5, 2.0), EXP_ABS_AT_2, places=10)
        self.assertAlmostEqual(EXP_ABS_AT_1, 0.4651, places=4)
        self.assertAlmostEqual(EXP_ABS_AT_2, 0.2340, places=4)

    def test_even_output(self):
        """K f is even and vanishes at the origin."""
        self.assertAlmostEqual(transform_1d(self.f, 0.5, -1.0), transform_1d(self.f, 0.5, 1.0), places=12)
        self.assertEqual(transform_1d(self.f, 0.5, 0.0), 0.0)

    def test_even_shortcut(self):
        """The even-function shortcut agrees with the two-sided form."""
        self.assertAlmostEqual(transform_even(self.f, 0.5, 1.0), EXP_ABS_AT_1, places=10)
        with self.assertRaises(InvalidInputError):
            transform_even(self.f, 0.5, -1.0)

    def test_invalid_c(self):
        """c must lie strictly between 0 and 1."""
        for c in (0.0, 1.0, 1.5):
            with self.assertRaises(InvalidInputError):
                transform_1d(self.f, c, 1.0)

    def test_grid_returns_errors(self):
        """Grid evaluation returns a quadrature error bound per value."""
        values, errors = transform_grid(self.f, 0.5, [1.0, 2.0])
        np.testing.assert_allclose(values, [EXP_ABS_AT_1, EXP_ABS_AT_2], atol=1e-10)
        self.assertTrue(np.all(errors >= 0.0))
        self.assertTrue(np.all(errors < 1e-8))

    def test_derivative_closed_form(self):
        """(K f)' = f(x/c)/c - f(x) - f(-x) + f(-x/c)/c, odd in x."""
        expected = 4.0 * np.exp(-2.0) - 2.0 * np.exp(-1.0)
        self.assertAlmostEqual(transform_derivative_1d(self.f, 0.5, 1.0), expected, places=12)
        self.assertAlmostEqual(transform_derivative_1d(self.f, 0.5, -1.0), -expected, places=12)

    def test_indicator_maps_to_next_spline(self):
        """K h_1 = h_2."""
        h1 = spline_field(build_spline(1, 0.5))
        for x, expected in ((0.75, 0.5), (0.375, 0.5), (0.3, 0.2)):
            self.assertAlmostEqual(transform_1d(h1, 0.5, x), expected, places=12)

    def test_field_integral(self):
        """int exp(-|t|) dt = 2."""
        self.assertAlmostEqual(field_integral(self.f), 2.0, places=10)


class TestGeneralTransform(unittest.TestCase):
    """Test cases for K_g with a general kernel."""

    def test_matches_one_dimensional_form(self):
        """With the indicator kernel K_g reduces to K."""
        spec = TransformSpec.one_dimensional(0.5)
        f = exp_abs().even_function()
        self.assertAlmostEqual(transform_dd(f, spec, 1.0), EXP_ABS_AT_1, places=9)

    def test_unbounded_kernel_refused(self):
        """An unbounded kernel with a non-compact f is refused."""
        kernel = ScalarField(evaluator=lambda pts: 1.0 / np.abs(pts[:, 0]), dim=1, name="unbounded")
        with self.assertRaises(RefusalError):
            transform_dd(exp_abs().even_function(), TransformSpec(kernel), 1.0)

    def test_transformed_support(self):
        """Supports multiply: a(c, 1) times a(c^2, 1) is a(c^3, 1)."""
        h2 = spline_field(build_spline(2, 0.5))
        support = transformed_support(h2, TransformSpec.one_dimensional(0.5))
        self.assertAlmostEqual(support.inner, 0.125)
        self.assertAlmostEqual(support.outer, 1.0)

    def test_radial_kernel_in_two_dimensions(self):
        """K_g of a radial f in 2-D sums to int f under the dilation of g."""
        m = SquareMatrix.scalar(2.0, 2)
        g = build_radial_pou(plateau_linear(1.0, 2.0), m).g
        f = plateau_linear(0.5, 1.0).field(2)
        spec = TransformSpec(g)
        total = field_integral(f)
        # g(M^j x / s) summed over j is 1, so the dilation sum of K_g f is int f
        x = np.array([0.7, 0.2])
        values = [transform_dd(f, spec, np.linalg.matrix_power(m.entries, j) @ x) for j in range(-30, 5)]
        self.assertAlmostEqual(sum(values), total, places=7)

    def test_kernel_abs_sum_bound(self):
        """A nonnegative partition has absolute dilation sum 1."""
        system = build_radial_pou(plateau_linear(1.0, 2.0), SquareMatrix.scalar(2.0))
        bound = kernel_abs_sum_bound(system.g, system.M, np.linspace(0.1, 5.0, 50))
        self.assertAlmostEqual(bound, 1.0, places=12)


class TestLiftedPartition(unittest.TestCase):
    """Test cases for partitions obtained by lifting K f radially."""

    def test_lifted_spline_partition_one_dimension(self):
        """K h_1 = h_2 lifted with c I sums to Q_1 = 1."""
        system = lifted_partition(spline_field(build_spline(1, 0.5)), 0.5)
        self.assertAlmostEqual(system.target_constant, 1.0, places=12)
        report = verify_partition(system, [0.3, 0.55, 0.9, 2.7], 1e-9)
        self.assertTrue(report.passed, report.to_keyvalue())

    def test_lifted_spline_partition_two_dimensions(self):
        """The radial lifting to R^2 keeps the dilation sum."""
        system = lifted_partition(spline_field(build_spline(1, 0.5)), 0.5, d=2)
        report = verify_partition(system, np.array([[0.3, 0.4], [0.6, 0.0], [-1.1, 2.0]]), 1e-9)
        self.assertTrue(report.passed, report.to_keyvalue())

    def test_plain_callable_needs_target(self):
        """Without a field the integral of f cannot be derived."""
        with self.assertRaises(InvalidInputError):
            lifted_partition(lambda t: np.exp(-abs(t)), 0.5)


class TestIntegrate(unittest.TestCase):
    """Test cases for the quadrature wrapper."""

    def test_breakpoints_and_orientation(self):
        """Reversed limits flip the sign; breakpoints split the interval."""
        f = lambda t: 1.0 if t > 0.3 else 0.0
        self.assertAlmostEqual(integrate(f, 0.0, 1.0, breakpoints=[0.3]).value, 0.7, places=12)
        self.assertAlmostEqual(integrate(f, 1.0, 0.0, breakpoints=[0.3]).value, -0.7, places=12)

    @patch('src.utils.transform.quad')
    def test_unconverged_quadrature_raises(self, mock_quad):
        """QUADPACK failure with a large error bound becomes a QuadratureError."""
        mock_quad.return_value = (1.0, 0.5, {}, "maximum number of subdivisions reached")
        with self.assertRaises(QuadratureError) as ctx:
            integrate(lambda t: t, 0.0, 1.0, QuadratureSpec(max_depth=2))
        self.assertEqual(ctx.exception.estimate, 1.0)
        self.assertEqual(ctx.exception.error_bound, 0.5)

    @patch('src.utils.transform.quad')
    def test_flagged_but_accurate_quadrature_accepted(self, mock_quad):
        """A flagged result within tolerance is kept."""
        mock_quad.return_value = (1.0, 1e-14, {}, "roundoff error detected")
        self.assertEqual(integrate(lambda t: t, 0.0, 1.0).value, 1.0)


if __name__ == '__main__':
    unittest.main()
