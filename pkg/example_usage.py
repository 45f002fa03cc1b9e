#!/usr/bin/env python3
"""
Example usage of the partition-of-unity library.
"""

import sys
import os

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from src.utils.fields import gaussian, plateau_linear
from src.utils.frames import build_radial_dual_pair, build_spline_dual_pair, verify_dual_relation
from src.utils.matrix import SquareMatrix
from src.utils.partition import build_radial_pou, verify_partition
from src.utils.sampling import band_grid, log_samples
from src.utils.splines import build_spline, spline_integrals


def main():
    # Example usage
    m = SquareMatrix.scalar(2.0, 2)

    print("1. Radial partition of unity from the Gaussian profile, M = 2I:")
    system = build_radial_pou(gaussian(), m)
    points, grid = log_samples(1e-2, 1e2, 200, dim=2, n_directions=16)
    print(verify_partition(system, points, grid_spec=grid.describe()).to_keyvalue())

    print("\n2. Geometric-knot spline h_3 with c = 0.5:")
    spline = build_spline(3, 0.5)
    print(spline.dump_pieces())
    print(f"Q_2 = {spline_integrals(3, 0.5).q(2):.17g}")

    print("\n3. Spline dual pair n=2, c=0.5, b=0.25:")
    pair = build_spline_dual_pair(2, 0.5, 0.25)
    points, grid = band_grid(pair.frequency_dilation, r0=pair.psi_hat.support.inner, n_radii=256)
    print(verify_dual_relation(pair, points, grid_spec=grid.describe()).to_keyvalue())

    print("\n4. Radial dual pair from plateau-linear(1, 2), M = 2I:")
    pair = build_radial_dual_pair(plateau_linear(1.0, 2.0), m)
    print(pair.to_keyvalue())

    print("\nExamples completed!")


if __name__ == "__main__":
    main()
