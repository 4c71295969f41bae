import math

import numpy as np
import pytest

from rieszlab.errors import PoleError, PreconditionError, UnsupportedInputError
from rieszlab.geometry import icosphere, make_circle, make_sphere
from rieszlab.riesz import (BetaOracle, QuadratureConfig, beta_oracle,
                            beta_residue, finite_part_at_pole, riesz_energy,
                            scaling_check)


# ----------------------------------------------------------------------
# closed-form oracles
# ----------------------------------------------------------------------

def test_circle_oracle_values():
    assert beta_oracle("circle", 1.0, 1.0) == pytest.approx(16 * math.pi,
                                                            rel=1e-14)
    assert beta_oracle("circle", 1.0, -2.0) == pytest.approx(0.0, abs=1e-13)
    assert beta_oracle("circle", 1.0, 0.0) == pytest.approx(4 * math.pi ** 2,
                                                            rel=1e-14)


def test_sphere_oracle_values():
    assert beta_oracle("sphere", 1.0, 0.0) == pytest.approx(16 * math.pi ** 2,
                                                            rel=1e-14)
    assert beta_oracle("sphere", 1.0, -4.0) == pytest.approx(-math.pi ** 2,
                                                             rel=1e-14)


def test_oracle_direct_quadrature_agreement():
    # the closed forms agree with direct double quadrature for z > -m
    from scipy.integrate import quad
    for z in (1.0, 0.3, -0.5):
        direct = 2 * math.pi * quad(
            lambda th: (2 * math.sin(th / 2)) ** z, 0, 2 * math.pi)[0]
        assert beta_oracle("circle", 1.0, z) == pytest.approx(direct, rel=1e-8)
    for z in (1.0, -0.5, -1.5):
        # chord reduction: 2 pi integral_0^2 t^(z+1) dt on the unit sphere
        direct = 4 * math.pi * 2 * math.pi * 2.0 ** (z + 2) / (z + 2)
        assert beta_oracle("sphere", 1.0, z) == pytest.approx(direct, rel=1e-12)


def test_radius_scaling_exponent():
    for r in (0.5, 2.0):
        assert beta_oracle("circle", r, 1.0) == pytest.approx(
            r ** 3 * 16 * math.pi, rel=1e-13)
        assert beta_oracle("sphere", r, -4.0) == pytest.approx(
            -math.pi ** 2, rel=1e-13)   # 2m + alpha = 0


def test_oracle_pole_error_carries_residue():
    with pytest.raises(PoleError) as exc:
        beta_oracle("circle", 1.0, -1.0)
    assert exc.value.residue == pytest.approx(4 * math.pi, rel=1e-12)
    with pytest.raises(PoleError) as exc:
        beta_oracle("sphere", 1.0, -2.0)
    assert exc.value.residue == pytest.approx(8 * math.pi ** 2, rel=1e-12)


def test_finite_part_at_pole_sphere():
    val = finite_part_at_pole("sphere", 1.0, -2.0)
    assert val == pytest.approx(8 * math.pi ** 2 * math.log(2), rel=1e-7)


def test_finite_part_at_pole_circle():
    # Laurent constant of the circle oracle at z = -1 is 8 pi log 2
    # (digamma expansion of the closed form)
    val = finite_part_at_pole("circle", 1.0, -1.0)
    assert val == pytest.approx(8 * math.pi * math.log(2), rel=1e-7)


def test_finite_part_at_pole_rejects_regular_points():
    with pytest.raises(PreconditionError):
        finite_part_at_pole("circle", 1.0, 0.5)
    with pytest.raises(PreconditionError):
        beta_residue("sphere", 1.0, -4.0)


def test_beta_oracle_object():
    oracle = BetaOracle("sphere", 2.0)
    assert oracle(-4.0) == pytest.approx(-math.pi ** 2, rel=1e-13)
    assert oracle.residue(-2.0) == pytest.approx(8 * math.pi ** 2 * 4.0,
                                                 rel=1e-12)


# ----------------------------------------------------------------------
# assembled energies vs oracles
# ----------------------------------------------------------------------

def test_circle_energy_unregularized():
    circ = make_circle()
    for alpha in (1.0, 0.5, -0.5):
        rep = riesz_energy(circ, alpha)
        oracle = beta_oracle("circle", 1.0, alpha)
        assert rep.value == pytest.approx(oracle, rel=1e-6)
        assert rep.value == pytest.approx(rep.near + rep.far, rel=1e-12)
        assert rep.error_estimate >= 0


def test_circle_knot_energy_is_zero():
    rep = riesz_energy(make_circle(), -2.0)
    assert abs(rep.value) < 1e-3
    assert rep.pole_residue is None   # -2 is not in the m=1 pole set


def test_sphere_energy_regularized():
    cfg = QuadratureConfig(outer_scale=0.12, inner_scale=0.5)
    rep = riesz_energy(make_sphere(), -4.0, config=cfg)
    assert rep.value == pytest.approx(-math.pi ** 2, rel=0.01)


def test_sphere_energy_at_pole_matches_continuation():
    cfg = QuadratureConfig(outer_scale=0.15, inner_scale=0.6)
    rep = riesz_energy(make_sphere(), -2.0, config=cfg)
    assert rep.value == pytest.approx(8 * math.pi ** 2 * math.log(2), rel=1e-6)
    assert rep.pole_residue == pytest.approx(8 * math.pi ** 2, rel=1e-8)


def test_eps0_independence():
    circ = make_circle()
    a = riesz_energy(circ, -2.0, config=QuadratureConfig(patch_radius=0.8))
    b = riesz_energy(circ, -2.0, config=QuadratureConfig(patch_radius=0.4))
    tol = a.error_estimate + b.error_estimate + 1e-9
    assert abs(a.value - b.value) <= max(tol, 1e-6)


def test_far_field_symmetry():
    # pairwise true-kernel contribution is symmetric in the two roles
    sph = make_sphere(base_nodes=(12, 24))
    q = sph.quadrature(1.0)
    d = np.linalg.norm(q.points[:, None] - q.points[None, :], axis=-1)
    np.fill_diagonal(d, 1.0)
    k = d ** -1.0
    np.fill_diagonal(k, 0.0)
    forward = q.weights @ k @ q.weights
    backward = q.weights @ k.T @ q.weights
    assert forward == pytest.approx(backward, rel=1e-13)


def test_mesh_energy_convergence_to_oracle():
    # refining the mesh quadrature halves the error for at least 3 levels
    oracle = beta_oracle("sphere", 1.0, 1.0)
    errors = []
    for subdiv in (1, 2, 3):
        mesh = icosphere(subdiv)
        rep = riesz_energy(mesh, 1.0)
        errors.append(abs(rep.value - oracle))
    assert errors[1] <= 0.5 * errors[0]
    assert errors[2] <= 0.5 * errors[1]


def test_mesh_regularized_unsupported_without_patches():
    mesh = icosphere(1)
    with pytest.raises(UnsupportedInputError):
        riesz_energy(mesh, -4.0, fit_patches=False)


def test_scaling_check_regular():
    circ = make_circle()
    rep = scaling_check(circ, 1.0, 2.0)
    assert rep.exponent == pytest.approx(3.0)
    assert rep.energy_scaled / rep.energy_base == pytest.approx(8.0, rel=1e-6)
    assert rep.passed


def test_scaling_check_scale_invariant_point():
    cfg = QuadratureConfig(outer_scale=0.12, inner_scale=0.5)
    rep = scaling_check(make_sphere(), -4.0, 2.0, config=cfg)
    assert rep.exponent == pytest.approx(0.0)
    assert rep.energy_scaled == pytest.approx(rep.energy_base, rel=0.01)


def test_scaling_check_identity():
    rep = scaling_check(make_circle(), 0.5, 1.0)
    assert rep.energy_scaled == pytest.approx(rep.energy_base, rel=1e-12)


def test_scaling_check_pole_log_coefficient():
    # at a pole the anomaly coefficient equals the beta residue
    cfg = QuadratureConfig(outer_scale=0.12, inner_scale=0.5)
    rep = scaling_check(make_sphere(), -2.0, 2.0, config=cfg)
    assert rep.at_pole
    assert rep.log_lambda_coefficient == pytest.approx(8 * math.pi ** 2,
                                                       rel=1e-5)


def test_report_json_roundtrip():
    rep = riesz_energy(make_circle(), 1.0)
    import json
    data = json.loads(rep.to_json())
    assert data["pole"] is None
    assert data["value"] == pytest.approx(rep.value, rel=1e-15)
