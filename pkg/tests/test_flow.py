import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from rieszlab.flow import (EnergySelector, FlowState, TrajectoryPoint,
                           contact_monitor, energy_gradient, flow_step,
                           ks_flow_energy, run_flow, write_trajectory_csv)
from rieszlab.geometry import (icosphere, mesh_disjoint_union, polygon_circle,
                               read_off, write_off)
from rieszlab.riesz import QuadratureConfig


def _perturbed_sphere(scale=0.05, seed=42, subdiv=1):
    ico = icosphere(subdiv)
    rng = np.random.default_rng(seed)
    factors = 1.0 + scale * rng.standard_normal((ico.num_vertices, 1))
    return ico.with_vertices(ico.vertices * factors)


def test_ks_flow_energy_round_sphere_is_minimal():
    assert ks_flow_energy(icosphere(1)) < 1e-12
    assert ks_flow_energy(_perturbed_sphere()) > 1e-3


def test_gradient_near_minimizer():
    g_round = energy_gradient(FlowState(mesh=icosphere(1)), "fd")
    g_pert = energy_gradient(FlowState(mesh=_perturbed_sphere()), "fd")
    assert np.linalg.norm(g_round) < 1e-4 * np.linalg.norm(g_pert)


def test_gradient_translation_invariance():
    g = energy_gradient(FlowState(mesh=_perturbed_sphere()), "fd")
    assert np.linalg.norm(g.sum(axis=0)) < 1e-6 * np.linalg.norm(g)


def test_gradient_translation_invariance_riesz_polygon():
    poly = polygon_circle(24)
    rng = np.random.default_rng(0)
    poly = poly.with_vertices(
        poly.vertices * (1 + 0.05 * rng.standard_normal((24, 1))))
    sel = EnergySelector("riesz", alpha=1.0)
    state = FlowState(mesh=poly, selector=sel,
                      config=QuadratureConfig(mesh_inner_subdiv=1))
    g = energy_gradient(state, "fd")
    assert np.linalg.norm(g.sum(axis=0)) < 1e-5 * np.linalg.norm(g)


def test_fd_vs_exact_gradient():
    state = FlowState(mesh=_perturbed_sphere())
    g_fd = energy_gradient(state, "fd")
    g_ex = energy_gradient(state, "exact")
    rel = np.max(np.abs(g_fd - g_ex)) / np.max(np.abs(g_ex))
    assert rel < 1e-3


def test_flow_halves_perturbed_sphere_energy():
    state = FlowState(mesh=_perturbed_sphere(), step_size=1e-2)
    state = run_flow(state, 50)
    e0 = state.trajectory[0].energy
    e1 = state.trajectory[-1].energy
    assert e1 < 0.5 * e0


def test_flow_strict_monotone_descent():
    state = FlowState(mesh=_perturbed_sphere(seed=3), step_size=1e-2)
    state = run_flow(state, 12)
    energies = [p.energy for p in state.trajectory]
    assert all(b < a for a, b in zip(energies, energies[1:]))


def test_flow_stationary_at_round_sphere():
    state = FlowState(mesh=icosphere(1), step_size=1e-2)
    state = flow_step(state)
    assert state.stationary


def test_flow_rotation_equivariance():
    R = Rotation.from_rotvec([0.3, -0.2, 0.5]).as_matrix()
    pert = _perturbed_sphere(seed=7)
    s1 = run_flow(FlowState(mesh=pert, step_size=1e-2), 5)
    s2 = run_flow(FlowState(mesh=pert.with_vertices(pert.vertices @ R.T),
                            step_size=1e-2), 5)
    dev = np.max(np.abs(s1.mesh.vertices @ R.T - s2.mesh.vertices))
    assert dev < 5 * 1e-8   # 1e-8 per accepted step


def test_contact_monitor_dumbbell_energy_increases():
    # driving two spheres together raises E_{-4} strictly at each halving
    cfg = QuadratureConfig(mesh_inner_subdiv=1)
    sel = EnergySelector("riesz", alpha=-4.0)
    energies = []
    dists = []
    for gap in (0.8, 0.4, 0.2, 0.1):
        a = icosphere(1, 1.0, (-(1.0 + gap / 2), 0.0, 0.0))
        b = icosphere(1, 1.0, (1.0 + gap / 2, 0.0, 0.0))
        mesh = mesh_disjoint_union(a, b)
        state = FlowState(mesh=mesh, selector=sel, config=cfg)
        report = contact_monitor(state)
        energies.append(report.energy)
        dists.append(report.min_distance)
    assert all(d1 > d2 for d1, d2 in zip(dists, dists[1:]))
    assert all(e1 < e2 for e1, e2 in zip(energies, energies[1:]))


def test_contact_monitor_ceiling_flag():
    sel = EnergySelector("riesz", alpha=-4.0)
    cfg = QuadratureConfig(mesh_inner_subdiv=1)
    trajectory = []
    base = None
    state = None
    for k, gap in enumerate((0.4, 0.1, 0.02)):
        a = icosphere(1, 1.0, (-(1.0 + gap / 2), 0.0, 0.0))
        b = icosphere(1, 1.0, (1.0 + gap / 2, 0.0, 0.0))
        mesh = mesh_disjoint_union(a, b)
        state = FlowState(mesh=mesh, selector=sel, config=cfg,
                          trajectory=trajectory)
        energy = state.energy()
        if base is None:
            base = energy
        trajectory.append(TrajectoryPoint(k, energy, 0.0,
                                          mesh.min_nonneighbor_distance()))
    report = contact_monitor(state, ceiling=base + 1.0)
    assert report.closing_in
    assert report.ceiling_exceeded


def test_static_monitor_constant():
    mesh = icosphere(1)
    state = FlowState(mesh=mesh)
    r1 = contact_monitor(state)
    r2 = contact_monitor(state)
    assert r1.min_distance == r2.min_distance
    assert r1.energy == r2.energy
    assert not r1.closing_in


def test_trajectory_csv_and_mesh_roundtrip(tmp_path):
    state = run_flow(FlowState(mesh=_perturbed_sphere(), step_size=1e-2), 3)
    csv_path = tmp_path / "traj.csv"
    write_trajectory_csv(state, csv_path)
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "iteration,energy,step_size,min_distance"
    assert len(lines) == len(state.trajectory) + 1
    off_path = tmp_path / "final.off"
    write_off(state.mesh, off_path)
    back = read_off(off_path)
    assert ks_flow_energy(back) == pytest.approx(ks_flow_energy(state.mesh),
                                                 abs=1e-12)


def test_selector_validation():
    with pytest.raises(Exception):
        EnergySelector("riesz")
    with pytest.raises(Exception):
        EnergySelector("bogus")
