#!/usr/bin/env python3
"""
Tests for dilation sums and scaling partitions of unity.
"""

import sys
import os
import unittest
import numpy as np

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from src.utils.errors import InvalidInputError, RefusalError, VerificationError
from src.utils.fields import (ScalarField, gaussian, kernel_integral_profile, plateau_linear, raised_cosine_kernel,
                              step)
from src.utils.matrix import SquareMatrix
from src.utils.partition import (ROUTE_EXACT, ROUTE_HEURISTIC, DilationSummer, PartitionSystem, TruncationPolicy,
                                 build_radial_pou, g_from_phi, limit_behaviour, partial_sum, phi_from_g,
                                 square_sum_bounds, telescoping_identity_gap, verify_partition)
from src.utils.sampling import band_grid, log_samples
from src.utils.splines import normalized_partition

COUNTEREXAMPLE = SquareMatrix.from_rows([[0.0, 2.0], [0.75, 0.0]])


class TestRadialPartition(unittest.TestCase):
    """Test cases for partitions built from radial profiles."""

    def test_gaussian_g_value(self):
        """g(1) = exp(-1) - exp(-4) for the Gaussian profile and M = 2."""
        system = build_radial_pou(gaussian(), SquareMatrix.scalar(2.0))
        self.assertAlmostEqual(float(system.g([[1.0]])[0]), np.exp(-1.0) - np.exp(-4.0), places=12)
        self.assertAlmostEqual(float(system.g([[1.0]])[0]), 0.349556, places=6)

    def test_gaussian_partition_in_two_dimensions(self):
        """The Gaussian partition sums to 1 over five decades of radii."""
        system = build_radial_pou(gaussian(), SquareMatrix.scalar(2.0, 2))
        points, grid = log_samples(1e-2, 1e2, 40, dim=2, n_directions=8)
        report = verify_partition(system, points, 1e-10, grid.describe())
        self.assertTrue(report.passed, report.to_keyvalue())
        self.assertIn("capped=0", " ".join(report.route_notes))

    def test_plateau_profile_uses_exact_sums(self):
        """A compactly supported profile gives an annular g and finite exact sums."""
        m = SquareMatrix.scalar(2.0, 2)
        system = build_radial_pou(plateau_linear(1.0, 2.0), m)
        self.assertAlmostEqual(system.g.support.inner, 0.5)
        self.assertAlmostEqual(system.g.support.outer, 2.0)
        self.assertTrue(system.metadata["nonnegative"])
        points, grid = band_grid(m, r0=0.5, n_radii=64, n_directions=16)
        report = verify_partition(system, points, 1e-12, grid.describe())
        self.assertTrue(report.passed)
        self.assertIn("exact=", report.route_notes[-1])
        self.assertTrue(np.all(report.columns["n_terms"] <= 3))

    def test_step_profile_partition(self):
        """Discontinuous profiles still partition unity."""
        system = build_radial_pou(step(1.0), SquareMatrix.scalar(3.0))
        report = verify_partition(system, np.linspace(0.01, 50.0, 200), 1e-12)
        self.assertTrue(report.passed)

    def test_non_expanding_refused(self):
        """A matrix with a contracting direction is refused."""
        with self.assertRaises(RefusalError):
            build_radial_pou(gaussian(), SquareMatrix.from_rows([[2.0, 0.0], [0.0, 0.5]]))

    def test_nonnegativity_refused_without_monotone_norm(self):
        """Expanding but not norm-monotone: the partition exists, the sign guarantee does not."""
        with self.assertRaises(RefusalError):
            build_radial_pou(plateau_linear(1.0, 2.0), COUNTEREXAMPLE, nonnegative=True)
        system = build_radial_pou(plateau_linear(1.0, 2.0), COUNTEREXAMPLE)
        self.assertFalse(system.metadata["nonnegative"])
        points, grid = band_grid(COUNTEREXAMPLE, r0=1.0, n_radii=32, n_directions=16)
        self.assertTrue(verify_partition(system, points, 1e-12, grid.describe()).passed)

    def test_origin_is_skipped(self):
        """The origin is excluded from verification and noted in the report."""
        system = build_radial_pou(plateau_linear(1.0, 2.0), SquareMatrix.scalar(2.0))
        report = verify_partition(system, [0.0, 0.7, 1.3], 1e-12)
        self.assertEqual(report.extras["n_samples"], 2)
        self.assertIn("skipped 1 sample(s) at the origin", report.route_notes)

    def test_partition_with_growth_constant_below_one(self):
        """An expanding matrix that shrinks some vectors (C < 1) still yields exact sums."""
        system = build_radial_pou(plateau_linear(1.0, 2.0), COUNTEREXAMPLE)
        c_const, _ = system.certificate.growth_constants
        self.assertLess(c_const, 1.0)
        points, grid = band_grid(COUNTEREXAMPLE, r0=0.5, n_radii=64, n_directions=16)
        report = verify_partition(system, points, 1e-12, grid.describe())
        self.assertTrue(report.passed, report.to_keyvalue())
        self.assertTrue(np.all(report.columns["tail_route"] == ROUTE_EXACT))

    def test_tail_route_column(self):
        """Every sample carries its own tail certificate in the report columns."""
        system = build_radial_pou(gaussian(), SquareMatrix.scalar(2.0))
        report = verify_partition(system, [0.1, 1.0, 10.0], 1e-10)
        np.testing.assert_array_equal(report.columns["tail_route"], [ROUTE_HEURISTIC] * 3)
        self.assertEqual(report.extras["tail_route_codes"], "0=exact, 1=heuristic, 2=capped")

    def test_raised_cosine_kernel_profile(self):
        """phi(s) = int_s^inf k gives a C^1 partition under dilation by 2."""
        profile = kernel_integral_profile(raised_cosine_kernel(1.0), support=1.0)
        self.assertAlmostEqual(float(profile(0.5)[0]), 0.5 - 1.0 / np.pi, places=12)
        self.assertEqual(float(profile(1.5)[0]), 0.0)
        system = build_radial_pou(profile, SquareMatrix.scalar(2.0), policy=TruncationPolicy(j_abs_max=80))
        report = verify_partition(system, [0.05, 0.3, 0.7, 1.5, 3.0], 1e-10)
        self.assertTrue(report.passed, report.to_keyvalue())

    def test_unnormalized_kernel_rejected(self):
        """The kernel must integrate to 1 over [0, inf)."""
        k = raised_cosine_kernel(1.0)
        with self.assertRaises(InvalidInputError):
            kernel_integral_profile(lambda t: 2.0 * k(t), support=1.0)



class TestPotentials(unittest.TestCase):
    """Test cases for the g <-> phi correspondence."""

    def test_phi_from_g_recovers_gaussian(self):
        """sum_{j >= 0} g(2^j x) recovers exp(-x^2)."""
        m = SquareMatrix.scalar(2.0)
        g = g_from_phi(gaussian().field(1), m)
        phi = phi_from_g(g, m)
        self.assertAlmostEqual(float(phi([[1.0]])[0]), np.exp(-1.0), places=12)
        self.assertAlmostEqual(float(phi([[0.5]])[0]), np.exp(-0.25), places=12)

    def test_phi_from_g_refuses_uncertified_series(self):
        """No expansion and no annular support: convergence cannot be certified."""
        m = SquareMatrix.scalar(0.5)
        g = g_from_phi(gaussian().field(1), m)
        with self.assertRaises(RefusalError):
            phi_from_g(g, m)

    def test_g_from_phi_dimension_mismatch(self):
        """Field and matrix dimensions must agree."""
        with self.assertRaises(InvalidInputError):
            g_from_phi(gaussian().field(1), SquareMatrix.scalar(2.0, 2))

    def test_telescoping_identity(self):
        """Finite partial sums telescope to phi(M^-m x) - phi(M^{n+1} x)."""
        m = SquareMatrix.scalar(2.0, 2)
        system = build_radial_pou(plateau_linear(1.0, 2.0), m)
        phi = plateau_linear(1.0, 2.0).field(2)
        points = np.array([[0.3, 0.1], [1.5, -0.7], [0.0, 0.9]])
        self.assertLess(telescoping_identity_gap(system, phi, points, 3, 4), 1e-14)

    def test_limit_behaviour(self):
        """phi(M^N x) tends to 1 at N -> -inf and to 0 at N -> +inf."""
        out = limit_behaviour(gaussian().field(1), SquareMatrix.scalar(2.0), [[1.0]], n_max=40)
        self.assertAlmostEqual(out["limit_minus"], 1.0, places=12)
        self.assertEqual(out["limit_plus"], 0.0)
        self.assertEqual(len(out["N"]), 81)

    def test_g_from_phi_with_contracting_matrix(self):
        """For M = 1/2 the annulus is (R1, R / lambda_1) and construction succeeds."""
        g = g_from_phi(plateau_linear(1.0, 2.0).field(1), SquareMatrix.scalar(0.5))
        self.assertAlmostEqual(g.support.inner, 1.0)
        self.assertAlmostEqual(g.support.outer, 4.0)
        self.assertAlmostEqual(float(g([[3.0]])[0]), -0.5)
        s = np.linspace(0.0, 6.0, 601)
        outside = (s <= 1.0) | (s >= 4.0)
        self.assertTrue(np.all(g(s[outside, None]) == 0.0))

    def test_g_from_phi_with_mixed_singular_values(self):
        """One singular value above 1 and one below: inner R1 / mu_1, outer R / lambda_1."""
        g = g_from_phi(plateau_linear(1.0, 2.0).field(2), SquareMatrix.from_rows([[3.0, 0.0], [0.0, 0.5]]))
        self.assertAlmostEqual(g.support.inner, 1.0 / 3.0)
        self.assertAlmostEqual(g.support.outer, 4.0)
        self.assertAlmostEqual(float(g([[0.4, 0.0]])[0]), 0.2)

    def test_phi_from_g_round_trip(self):
        """g_from_phi(phi_from_g(g)) reproduces an annular g on random samples."""
        m = SquareMatrix.scalar(3.0)
        system = build_radial_pou(step(1.0), m)
        phi = phi_from_g(system.g, m)
        self.assertEqual(phi.metadata["route"], "exact")
        samples = np.random.default_rng(11).uniform(0.01, 5.0, 1000)[:, None]
        g_again = g_from_phi(phi, m)
        self.assertLessEqual(float(np.max(np.abs(g_again(samples) - system.g(samples)))), 1e-12)

    def test_phi_from_g_flags_missing_tail_certificate(self):
        """A g whose terms never decay reaches the cap and is flagged with a warning."""
        ones = ScalarField(evaluator=lambda pts: np.ones(len(pts)), dim=1, name="one")
        phi = phi_from_g(ones, SquareMatrix.scalar(2.0), TruncationPolicy(j_abs_max=5))
        with self.assertLogs('src.utils.partition', level='WARNING'):
            value = float(phi([[1.0]])[0])
        self.assertEqual(value, 6.0)
        self.assertTrue(phi.metadata["tail_capped"])

    def test_telescoping_identity_at_support_edges(self):
        """The identity holds for single terms and at the radii R1 / mu_1, R1 and R."""
        m = SquareMatrix.scalar(2.0, 2)
        system = build_radial_pou(plateau_linear(1.0, 2.0), m)
        phi = plateau_linear(1.0, 2.0).field(2)
        points = np.array([[0.5, 0.0], [1.0, 0.0], [0.0, 2.0]])
        self.assertLessEqual(telescoping_identity_gap(system, phi, points, 0, 0), 1e-15)
        self.assertLess(telescoping_identity_gap(system, phi, points, 6, 6), 1e-14)
        np.testing.assert_allclose(partial_sum(system, points, -6, 6), 1.0, atol=1e-14)



class TestTruncation(unittest.TestCase):
    """Test cases for truncated sums over j in Z."""

    def test_invalid_policy(self):
        """Tail tolerance and cap must be positive."""
        with self.assertRaises(InvalidInputError):
            TruncationPolicy(tail_tol=0.0)
        with self.assertRaises(InvalidInputError):
            TruncationPolicy(j_abs_max=0)

    def test_non_decaying_sum_is_capped(self):
        """A constant field never gets a tail certificate."""
        ones = ScalarField(evaluator=lambda pts: np.ones(len(pts)), dim=1, name="one")
        result = DilationSummer(SquareMatrix.scalar(2.0), TruncationPolicy(j_abs_max=5)).sum(ones, [[1.0]])
        self.assertEqual(float(result.values[0]), 11.0)
        self.assertTrue(result.any_capped)
        self.assertEqual(result.route_counts()["capped"], 1)

    def test_bounded_index_range(self):
        """Explicit index bounds restrict the sum."""
        system = build_radial_pou(plateau_linear(1.0, 2.0), SquareMatrix.scalar(2.0))
        result = system.summer.sum(system.g, [[1.5]], j_min=5, j_max=8)
        self.assertEqual(float(result.values[0]), 0.0)


class TestSquareSums(unittest.TestCase):
    """Test cases for square-sum bounds of nonnegative partitions."""

    def test_spline_square_sum_bounds(self):
        """For h_2 / Q_1 with c = 1/2 the square sum ranges over [1/2, 1]."""
        system = normalized_partition(2, 0.5)
        lower, upper = square_sum_bounds(system, [0.75, 0.8, 0.9, 1.0])
        self.assertAlmostEqual(lower, 0.5, places=12)
        self.assertAlmostEqual(upper, 1.0, places=12)

    def test_spline_partition_is_exact(self):
        """h_3 / Q_2 sums to 1 on random samples of one band."""
        system = normalized_partition(3, 0.5)
        samples = np.random.default_rng(7).uniform(0.5, 1.0, 500)
        self.assertTrue(verify_partition(system, samples, 1e-12).passed)

    def test_square_sum_bounds_at_band_edges(self):
        """At both ends of the band (1/2, 1] a single term is 1, so the upper bound 1 is attained."""
        lower, upper = square_sum_bounds(normalized_partition(2, 0.5), [0.5, 1.0])
        self.assertAlmostEqual(lower, 1.0, places=12)
        self.assertAlmostEqual(upper, 1.0, places=12)

    def test_square_sum_bound_violation(self):
        """A system claiming the nonnegative guarantee must keep the square sum <= 1."""
        base = build_radial_pou(step(1.0), SquareMatrix.scalar(3.0))
        self.assertEqual(square_sum_bounds(base, [0.5, 0.9]), (1.0, 1.0))
        inflated = PartitionSystem(g=base.g.scaled(1.5), M=base.M, metadata={"nonnegative": True})
        with self.assertRaises(VerificationError):
            square_sum_bounds(inflated, [0.5, 0.9])

    def test_square_sum_bounds_empty_samples(self):
        """Only the origin: no sample is left to bound."""
        with self.assertRaises(InvalidInputError):
            square_sum_bounds(normalized_partition(2, 0.5), [0.0])



if __name__ == '__main__':
    unittest.main()
