"""Gradient descent of a perturbed sphere mesh under the (1-cos)^2 energy.

A randomly perturbed icosphere flows back toward roundness; the energy
decreases strictly at every accepted step. The contact monitor then shows
the regularized alpha=-4 energy climbing as a two-sphere dumbbell closes.
"""

import numpy as np

from rieszlab import (EnergySelector, FlowState, QuadratureConfig,
                      contact_monitor, icosphere, mesh_disjoint_union,
                      run_flow)


def main():
    ico = icosphere(1)
    rng = np.random.default_rng(42)
    pert = ico.with_vertices(
        ico.vertices * (1 + 0.05 * rng.standard_normal((ico.num_vertices, 1))))
    state = run_flow(FlowState(mesh=pert, step_size=1e-2), 30)
    print("KS descent on a 5%-perturbed icosphere:")
    for p in state.trajectory[::6]:
        print(f"  step {p.iteration:3d}: energy {p.energy:.3e}")
    print(f"  final ({state.iteration} steps): "
          f"{state.trajectory[-1].energy:.3e}")

    print("contact monitor, two icospheres at shrinking gap (alpha = -4):")
    sel = EnergySelector("riesz", alpha=-4.0)
    cfg = QuadratureConfig(mesh_inner_subdiv=1)
    for gap in (0.8, 0.4, 0.2, 0.1):
        a = icosphere(1, 1.0, (-(1.0 + gap / 2), 0.0, 0.0))
        b = icosphere(1, 1.0, (1.0 + gap / 2, 0.0, 0.0))
        st = FlowState(mesh=mesh_disjoint_union(a, b), selector=sel,
                       config=cfg)
        rep = contact_monitor(st)
        print(f"  gap {gap:4.2f}: min distance {rep.min_distance:.3f}  "
              f"energy {rep.energy:10.4f}")


if __name__ == "__main__":
    main()
