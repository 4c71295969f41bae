"""Combined angles and Moebius invariance of the (1-cos)^m energy.

Shows the tangent-sphere angle vanishing identically on round spheres, the
parallel-plane formula, and the numerical invariance of the energy under a
sphere inversion of an ellipsoid.
"""

import numpy as np

from rieszlab import (MoebiusMap, combined_angle_cos,
                      combined_angle_cos_frames, ks_energy, make_ellipsoid,
                      make_sphere, moebius_invariance_check)


def main():
    sph = make_sphere()
    c = combined_angle_cos(sph, (0, [0.9, 0.4]), (0, [2.1, 3.0]))
    print(f"round sphere: cos(theta) = {c:.15f} for an arbitrary pair")

    T = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    y = np.array([1.0, 1.0, 1.0])
    pr2 = 2.0 / 3.0
    print("parallel planes, v = (1,1,1)/sqrt(3): "
          f"cos(theta) = {combined_angle_cos_frames(np.zeros(3), T, y, T):+.6f}"
          f"  (2|pr v|^2 - 1 = {2 * pr2 - 1:+.6f})")

    ell = make_ellipsoid(1.0, 1.0, 1.2)
    print(f"ellipsoid energy: {ks_energy(ell).value:.8f}")
    rep = moebius_invariance_check(
        ell, MoebiusMap("inversion", center=(3.0, 0.2, 0.1), radius=2.0), "ks")
    print(f"after inversion:  {rep.energy_transformed:.8f}  "
          f"(rel diff {rep.rel_difference:.2e}, refined "
          f"{rep.refined_rel_difference:.2e})")


if __name__ == "__main__":
    main()
