#!/usr/bin/env python3
"""
Tests for expansion analysis of dilation matrices.
"""

import sys
import os
import unittest
import numpy as np

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from src.utils.errors import InvalidInputError, RangeError
from src.utils.matrix import (Norm, PowerTable, SquareMatrix, expanding_orientation, is_expanding,
                              singular_interval, spectral_radius)

# Expanding (eigenvalues +-sqrt(1.5)) but shrinks e_2 to 0.75 e_1
COUNTEREXAMPLE = [[0.0, 2.0], [0.75, 0.0]]


class TestSquareMatrix(unittest.TestCase):
    """Test cases for the matrix value type."""

    def test_rejects_non_square(self):
        """Non-square input is malformed."""
        with self.assertRaises(InvalidInputError):
            SquareMatrix.from_rows([[1.0, 2.0]])

    def test_rejects_non_finite(self):
        """NaN entries are rejected."""
        with self.assertRaises(InvalidInputError):
            SquareMatrix.from_rows([[np.nan]])

    def test_singular_matrix(self):
        """Inverting a singular matrix raises instead of returning garbage."""
        m = SquareMatrix.from_rows([[1.0, 2.0], [2.0, 4.0]])
        self.assertFalse(m.is_invertible())
        with self.assertRaises(InvalidInputError):
            m.inverse()
        with self.assertRaises(InvalidInputError):
            is_expanding(m)

    def test_scalar_and_transpose(self):
        """Scalar matrices are detected and transposes are exact."""
        self.assertTrue(SquareMatrix.scalar(2.0, 3).is_scalar())
        m = SquareMatrix.from_rows(COUNTEREXAMPLE)
        self.assertFalse(m.is_scalar())
        np.testing.assert_array_equal(m.transpose().entries, np.array(COUNTEREXAMPLE).T)


class TestExpansion(unittest.TestCase):
    """Test cases for spectral analysis and the expansion certificate."""

    def test_spectral_radius(self):
        """The spectral radius of a diagonal matrix is its largest entry."""
        self.assertAlmostEqual(spectral_radius(SquareMatrix.from_rows([[2.0, 0.0], [0.0, -3.0]])), 3.0)

    def test_dyadic_matrix_is_expanding_and_monotone(self):
        """2I expands and never shrinks a vector."""
        cert = is_expanding(SquareMatrix.scalar(2.0, 2))
        self.assertTrue(cert.is_expanding)
        self.assertTrue(cert.norm_monotone)
        self.assertAlmostEqual(cert.spectral_radius_of_inverse, 0.5)
        c_const, alpha = cert.growth_constants
        self.assertAlmostEqual(alpha, 2.0, places=6)
        self.assertGreater(c_const, 0.0)
        self.assertLessEqual(c_const, 1.0)

    def test_counterexample_is_expanding_but_not_monotone(self):
        """Expanding matrices can still shrink some vectors, in both norms."""
        m = SquareMatrix.from_rows(COUNTEREXAMPLE)
        for norm in Norm:
            cert = is_expanding(m, norm)
            self.assertTrue(cert.is_expanding)
            self.assertFalse(cert.norm_monotone)
        self.assertAlmostEqual(singular_interval(m, 1).lambda_j, 0.75)
        self.assertAlmostEqual(is_expanding(m).spectral_radius_of_inverse, np.sqrt(2.0 / 3.0), delta=1e-10)

    def test_mixed_scaling_is_not_expanding(self):
        """One contracting direction rules expansion out; the certificate carries no constants."""
        cert = is_expanding(SquareMatrix.from_rows([[2.0, 0.0], [0.0, 0.5]]))
        self.assertFalse(cert.is_expanding)
        self.assertIsNone(cert.growth_constants)

    def test_growth_lower_bound_holds(self):
        """lambda_N >= C alpha^N for a Jordan block over the fitted range."""
        m = SquareMatrix.from_rows([[2.0, 1.0], [0.0, 2.0]])
        c_const, alpha = is_expanding(m).growth_constants
        for n in range(0, 30):
            lam = singular_interval(m, n).lambda_j
            self.assertGreaterEqual(lam, c_const * alpha ** n * (1.0 - 1e-12))

    def test_certificate_keyvalue(self):
        """The certificate renders as key = value lines."""
        text = is_expanding(SquareMatrix.scalar(3.0)).to_keyvalue()
        self.assertIn("is_expanding = true", text)
        self.assertIn("norm = euclid", text)
        self.assertIn("growth_alpha = ", text)

    def test_expanding_orientation(self):
        """A contraction is summed through its inverse; mixed scalings have no orientation."""
        self.assertAlmostEqual(expanding_orientation(SquareMatrix.scalar(0.5)).entries[0, 0], 2.0)
        self.assertIsNone(expanding_orientation(SquareMatrix.from_rows([[2.0, 0.0], [0.0, 0.5]])))


class TestSingularInterval(unittest.TestCase):
    """Test cases for the norm bounds of matrix powers."""

    def test_euclidean_bounds_are_singular_values(self):
        """For a diagonal matrix the bounds are the extreme powered entries."""
        m = SquareMatrix.from_rows([[2.0, 0.0], [0.0, 3.0]])
        b = singular_interval(m, 2)
        self.assertAlmostEqual(b.lambda_j, 4.0)
        self.assertAlmostEqual(b.mu_j, 9.0)
        b = singular_interval(m, -1)
        self.assertAlmostEqual(b.lambda_j, 1.0 / 3.0)
        self.assertAlmostEqual(b.mu_j, 0.5)

    def test_max_norm_bounds(self):
        """Max-norm bounds come from induced infinity norms of M^j and M^-j."""
        m = SquareMatrix.from_rows([[2.0, 0.0], [0.0, 3.0]])
        b = singular_interval(m, 1, Norm.MAX)
        self.assertAlmostEqual(b.lambda_j, 2.0)
        self.assertAlmostEqual(b.mu_j, 3.0)

    def test_identity_power(self):
        """j = 0 gives the trivial bounds."""
        b = singular_interval(SquareMatrix.from_rows(COUNTEREXAMPLE), 0)
        self.assertEqual((b.lambda_j, b.mu_j), (1.0, 1.0))

    def test_range_error(self):
        """|j| above J_max is a range error."""
        with self.assertRaises(RangeError):
            singular_interval(SquareMatrix.scalar(2.0), 5, j_max=3)

    def test_power_table_matches_direct_computation(self):
        """Cached powers invert each other and their bounds match the direct ones."""
        m = SquareMatrix.from_rows([[2.0, 1.0], [0.0, 3.0]])
        table = PowerTable(m, Norm.EUCLID, 6)
        np.testing.assert_allclose(table.power(-3) @ table.power(3), np.eye(2), atol=1e-12)
        for j in (-4, -1, 2, 5):
            direct = singular_interval(m, j)
            cached = table.bounds(j)
            self.assertAlmostEqual(cached.lambda_j, direct.lambda_j, delta=1e-9 * direct.mu_j)
            self.assertAlmostEqual(cached.mu_j, direct.mu_j, delta=1e-9 * direct.mu_j)


if __name__ == '__main__':
    unittest.main()
