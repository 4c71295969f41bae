"""Round-manifold energies against their closed forms.

The double Riesz integral over a round circle or sphere has a closed-form
meromorphic continuation in the exponent. This script evaluates the
assembled regularized energy at a few exponents, including a pole where the
Hadamard value equals the constant Laurent term, and prints the comparison.
"""

import math

from rieszlab import (QuadratureConfig, beta_oracle, finite_part_at_pole,
                      make_circle, make_sphere, riesz_energy)


def main():
    circ = make_circle()
    print("== unit circle ==")
    for alpha in (1.0, 0.5, -0.5):
        rep = riesz_energy(circ, alpha)
        oracle = beta_oracle("circle", 1.0, alpha)
        print(f"  alpha={alpha:+.1f}: energy {rep.value:+.9f}  "
              f"closed form {oracle:+.9f}  "
              f"(rel {abs(rep.value - oracle) / abs(oracle):.1e})")
    rep = riesz_energy(circ, -2.0)
    print(f"  alpha=-2.0: energy {rep.value:+.3e}  (the knot-energy value of "
          "the round circle is exactly 0)")

    print("== unit sphere ==")
    cfg = QuadratureConfig(outer_scale=0.15, inner_scale=0.6)
    rep = riesz_energy(make_sphere(), -4.0, config=cfg)
    print(f"  alpha=-4.0: energy {rep.value:+.7f}  closed form "
          f"{-math.pi ** 2:+.7f}")
    rep = riesz_energy(make_sphere(), -2.0, config=cfg)
    fp = finite_part_at_pole("sphere", 1.0, -2.0)
    print(f"  alpha=-2.0 (pole): energy {rep.value:+.7f}  Laurent constant "
          f"{fp:+.7f}  residue {rep.pole_residue:+.5f} "
          f"(8 pi^2 = {8 * math.pi ** 2:.5f})")


if __name__ == "__main__":
    main()
