"""Moebius-invariant energies: combined angle, Kusner-Sullivan, Auckly-Sadun.

The combined angle theta(x, y) between the tangent plane at y and the
tangent plane at y of the m-sphere tangent to the surface at x through y is
computed by reflecting the x-frame across the chord direction:
    ehat_i = 2 <e_i, v> v - e_i,
    cos theta = (-1)^(m-1) det(<ehat_i, w_j>) / sqrt(det(<w_i, w_j>)),
with e_i an oriented orthonormal frame at x and w_j any positively oriented
tangent basis at y. This avoids constructing the tangent sphere explicitly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (OrientationError, PreconditionError, SingularMapError,
                     SingularPairError, UnsupportedInputError)
from .geometry.charts import ChartSurface, orthonormal_frames, transform_surface
from .geometry.meshes import TriMesh, euler_characteristic
from .geometry.patches import curvature_at, graph_patch_at, tangent_frame
from .quadrature import compensated_sum
from .riesz import EnergyReport, QuadratureConfig, riesz_energy

__all__ = [
    "MoebiusMap",
    "combined_angle_cos",
    "combined_angle_cos_frames",
    "ks_energy",
    "ks_cross_energy",
    "as_energy",
    "apply_moebius",
    "moebius_invariance_check",
    "InvarianceReport",
]


def combined_angle_cos_frames(x, tangent_x, y, basis_y):
    """cos of the combined angle from an oriented orthonormal frame at x and
    any positively oriented tangent basis at y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = y - x
    dist = float(np.linalg.norm(d))
    if dist < 1e-14:
        raise SingularPairError("combined angle needs two distinct points")
    v = d / dist
    tx = np.asarray(tangent_x, dtype=float)
    wy = np.asarray(basis_y, dtype=float)
    m = tx.shape[1]
    ehat = 2.0 * np.outer(v, v @ tx) - tx
    G = ehat.T @ wy
    W = wy.T @ wy
    if m == 1:
        cosv = float(G[0, 0]) / math.sqrt(float(W[0, 0]))
    else:
        detG = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
        detW = W[0, 0] * W[1, 1] - W[0, 1] * W[1, 0]
        cosv = float(detG) / math.sqrt(float(detW))
    cosv *= (-1.0) ** (m - 1)
    return min(1.0, max(-1.0, cosv))


def _point_and_basis(surface, locator):
    if isinstance(surface, ChartSurface):
        if isinstance(locator, tuple) and np.isscalar(locator[0]):
            idx, u = int(locator[0]), np.atleast_1d(np.asarray(locator[1], float))
        else:
            idx, u = 0, np.atleast_1d(np.asarray(locator, float))
        chart = surface.charts[idx]
        return chart.value(u), chart.jacobian(u)
    if isinstance(surface, TriMesh):
        T, _ = tangent_frame(surface, int(locator))
        return surface.vertices[int(locator)], T
    raise UnsupportedInputError(f"unsupported surface type {type(surface)!r}")


def combined_angle_cos(surface, loc_x, loc_y) -> float:
    """cos theta(x, y) for two located points of an oriented surface."""
    x, jac_x = _point_and_basis(surface, loc_x)
    y, basis_y = _point_and_basis(surface, loc_y)
    tx, _ = orthonormal_frames(jac_x)
    return combined_angle_cos_frames(x, tx, y, basis_y)


# ----------------------------------------------------------------------
# pairwise quadrature of the (1 - cos)^m / |x-y|^(2m) kernel
# ----------------------------------------------------------------------

def _pairwise_one_minus_cos(x_pts, x_frames, y_pts, y_frames):
    """(1 - cos theta) and distances for all point pairs, O(n) frames.

    Both frame stacks must be oriented orthonormal; returns (omc, dist)
    with zeros on coincident pairs (caller must mask them).
    """
    m = x_frames.shape[-1]
    diff = y_pts[None, :, :] - x_pts[:, None, :]          # (Nx, Ny, n)
    dist = np.linalg.norm(diff, axis=-1)
    safe = np.where(dist > 0, dist, 1.0)
    v = diff / safe[..., None]
    # a_k = <v, e_k(x)>, G_kl = <ehat_k, w_l> = 2 a_k b_l - <e_k, w_l>
    a = np.einsum("xyn,xnk->xyk", v, x_frames)
    b = np.einsum("xyn,ynl->xyl", v, y_frames)
    ew = np.einsum("xnk,ynl->xykl", x_frames, y_frames)
    G = 2.0 * a[..., :, None] * b[..., None, :] - ew
    if m == 1:
        cos = G[..., 0, 0]
    else:
        # (-1)^(m-1) det(G) with m = 2
        cos = -(G[..., 0, 0] * G[..., 1, 1] - G[..., 0, 1] * G[..., 1, 0])
    omc = 1.0 - np.clip(cos, -1.0, 1.0)
    omc[dist == 0.0] = 0.0
    return omc, dist


def _chart_diag_limits(surface, quad, cutoff, n_dirs=4):
    """Extrapolated diagonal limits of (1-cos)/|x-y|^2 per chart node."""
    limits = np.zeros(len(quad.points))
    scales = np.array([0.5, 0.25, 0.125])
    tx, _ = quad.frames()
    for i in range(len(quad.points)):
        chart = surface.charts[quad.chart_index[i]]
        u0 = quad.params[i]
        J0 = quad.jacobians[i]
        x0 = quad.points[i]
        target = quad.spacing[i]
        vals = []
        m = surface.m
        if m == 1:
            dirs = np.array([[1.0], [-1.0]])
        else:
            ang = np.linspace(0, math.pi, n_dirs, endpoint=False)
            dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        for e in dirs:
            step = e / np.linalg.norm(J0 @ e)
            samples = []
            for s in scales:
                u = u0 + step * (target * s)
                y = chart.value(u)
                wy = chart.jacobian(u)
                d = float(np.linalg.norm(y - x0))
                c = combined_angle_cos_frames(x0, tx[i], y, wy)
                samples.append(((1.0 - c) / d ** 2, d))
            # quadratic extrapolation to d = 0
            ds = np.array([s[1] for s in samples])
            fs = np.array([s[0] for s in samples])
            V = np.vander(ds, 3, increasing=True)
            coef = np.linalg.solve(V, fs)
            vals.append(coef[0])
        limits[i] = float(np.mean(vals))
    return limits


def _mesh_diag_limits(mesh, patches, cutoff):
    limits = np.zeros(mesh.num_vertices)
    scales = np.array([0.5, 0.25, 0.125])
    local = mesh.local_scale()
    for i, patch in enumerate(patches):
        m = mesh.m
        if m == 1:
            dirs = np.array([[1.0], [-1.0]])
        else:
            ang = np.linspace(0, math.pi, 4, endpoint=False)
            dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        x0 = patch.base_point
        vals = []
        for e in dirs:
            samples = []
            for s in scales:
                eta = e * min(local[i], patch.radius) * s
                y = patch.embed(eta[None])[0]
                dh = patch.height_jacobian(eta[None])[0]
                wy = patch.tangent + patch.normal @ dh
                d = float(np.linalg.norm(y - x0))
                c = combined_angle_cos_frames(x0, patch.tangent, y, wy)
                samples.append(((1.0 - c) / d ** 2, d))
            ds = np.array([s[1] for s in samples])
            fs = np.array([s[0] for s in samples])
            V = np.vander(ds, 3, increasing=True)
            coef = np.linalg.solve(V, fs)
            vals.append(coef[0])
        limits[i] = float(np.mean(vals))
    return limits


def _ks_assemble(pts, frames, weights, spacing, limits, m, block=512):
    """Blocked double sum of (1-cos)^m / d^(2m) with near-diagonal limits."""
    N = len(pts)
    total_rows = []
    for lo in range(0, N, block):
        hi = min(lo + block, N)
        omc, dist = _pairwise_one_minus_cos(pts[lo:hi], frames[lo:hi],
                                            pts, frames)
        cut = spacing[lo:hi, None] * 0.25
        near = dist < cut
        with np.errstate(divide="ignore", invalid="ignore"):
            q = omc ** m / dist ** (2 * m)
        if limits is not None:
            lim_block = (limits[lo:hi, None] ** m) * np.ones((1, N))
            q = np.where(near, lim_block, q)
        else:
            q = np.where(near, 0.0, q)
        row = q @ weights
        total_rows.append(row * weights[lo:hi])
    return compensated_sum(np.concatenate(total_rows))


def ks_energy(surface, config: QuadratureConfig | None = None,
              allow_open=False, allow_unembedded=False,
              scale=None) -> EnergyReport:
    """Kusner-Sullivan energy: double integral of (1-cos theta)^m/|x-y|^2m.

    The integrand extends continuously to the diagonal (it is O(1) there on
    C^2 surfaces); pairs closer than a quarter of the local node spacing use
    the limit extrapolated from three shrinking radii. Non-embedded meshes
    are rejected by default: the energy is discontinuous on immersed inputs
    (a double cover scores zero while nearby embedded pairs blow up).
    """
    config = config or QuadratureConfig()
    m = surface.m
    if isinstance(surface, ChartSurface):
        if not surface.closed and not allow_open:
            raise PreconditionError("ks_energy needs a closed surface "
                                    "(allow_open overrides)")
        q = surface.quadrature(scale if scale is not None else 0.5)
        frames, _ = q.frames()
        limits = _chart_diag_limits(surface, q, 0.25)
        value = _ks_assemble(q.points, frames, q.weights, q.spacing, limits, m)
        return EnergyReport(value=value, near=0.0, far=value, eps0=0.0,
                            error_estimate=0.0)
    if isinstance(surface, TriMesh):
        if not surface.closed and not allow_open:
            raise PreconditionError("ks_energy needs a closed mesh")
        if not surface.oriented:
            raise OrientationError("ks_energy needs consistent orientation")
        if not allow_unembedded:
            sep = surface.min_nonneighbor_distance()
            scale_local = float(np.median(surface.local_scale()))
            if sep < 0.3 * scale_local:
                raise UnsupportedInputError(
                    "mesh looks self-intersecting or immersed "
                    f"(non-neighbor separation {sep:.3g} vs local scale "
                    f"{scale_local:.3g}); E_KS is discontinuous there")
        patches = [graph_patch_at(surface, i, None, measure_bound=False)
                   for i in range(surface.num_vertices)]
        frames = np.stack([p.tangent for p in patches])
        pts = surface.vertices
        weights = surface.vertex_weights()
        spacing = surface.local_scale()
        limits = _mesh_diag_limits(surface, patches, 0.25)
        value = _ks_assemble(pts, frames, weights, spacing, limits, m)
        return EnergyReport(value=value, near=0.0, far=value, eps0=0.0,
                            error_estimate=0.0)
    raise UnsupportedInputError(f"unsupported surface type {type(surface)!r}")


def ks_cross_energy(surface_a, surface_b, scale=1.0) -> float:
    """Cross term of the Kusner-Sullivan energy between two disjoint pieces."""
    qa = surface_a.quadrature(scale)
    qb = surface_b.quadrature(scale)
    fa, _ = qa.frames()
    fb, _ = qb.frames()
    m = surface_a.m
    omc, dist = _pairwise_one_minus_cos(qa.points, fa, qb.points, fb)
    if np.any(dist == 0.0):
        raise SingularPairError("pieces touch: cross energy undefined")
    q = omc ** m / dist ** (2 * m)
    return float(qa.weights @ q @ qb.weights)


# ----------------------------------------------------------------------
# Auckly-Sadun surface energy
# ----------------------------------------------------------------------

def as_energy(surface, s: float, config: QuadratureConfig | None = None) -> EnergyReport:
    """Auckly-Sadun energy: E_(-4) + (pi/16) I[D log D] + (pi^2/2) chi + s I[D].

    D is the umbilicity defect |h11-h22|^2 + 4|h12|^2; the D log D integrand
    is extended by 0 at umbilic points. Surfaces only (m = 2).
    """
    config = config or QuadratureConfig()
    if surface.m != 2:
        raise UnsupportedInputError("as_energy is defined for m = 2 surfaces")
    if isinstance(surface, ChartSurface):
        if surface.euler_char is None:
            raise PreconditionError("surface needs a known Euler characteristic")
        chi = surface.euler_char
        q = surface.quadrature(config.inner_scale * 0.5)
        locs = [(int(q.chart_index[i]), q.params[i]) for i in range(len(q.points))]
        weights = q.weights
    elif isinstance(surface, TriMesh):
        chi = euler_characteristic(surface)
        locs = list(range(surface.num_vertices))
        weights = surface.vertex_weights()
    else:
        raise UnsupportedInputError(f"unsupported surface type {type(surface)!r}")
    deltas = np.array([curvature_at(surface, loc).delta for loc in locs])
    dlogd = np.where(deltas > 1e-14, deltas * np.log(np.maximum(deltas, 1e-300)),
                     0.0)
    int_delta = compensated_sum(weights * deltas)
    int_dlogd = compensated_sum(weights * dlogd)
    base = riesz_energy(surface, -4.0, config=config)
    topo = 0.5 * math.pi ** 2 * chi
    value = base.value + math.pi / 16.0 * int_dlogd + topo + s * int_delta
    return EnergyReport(value=value, near=base.near, far=base.far,
                        eps0=base.eps0,
                        error_estimate=base.error_estimate)


# ----------------------------------------------------------------------
# Moebius maps
# ----------------------------------------------------------------------

@dataclass
class MoebiusMap:
    """Sphere inversion or similarity of the ambient space."""

    kind: str                      # "inversion" | "similarity"
    center: np.ndarray = None      # inversion center / similarity fixed point
    radius: float = 1.0            # inversion radius
    scale: float = 1.0             # similarity factor

    def __post_init__(self):
        if self.kind not in ("inversion", "similarity"):
            raise PreconditionError(f"unknown Moebius map kind {self.kind!r}")
        if self.center is not None:
            self.center = np.asarray(self.center, dtype=float)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        c = self.center if self.center is not None else np.zeros(x.shape[-1])
        if self.kind == "similarity":
            return c + self.scale * (x - c)
        d = x - c
        rho2 = np.sum(d * d, axis=-1, keepdims=True)
        return c + self.radius ** 2 * d / rho2

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        c = self.center if self.center is not None else np.zeros(n)
        if self.kind == "similarity":
            eye = self.scale * np.eye(n)
            return np.broadcast_to(eye, x.shape[:-1] + eye.shape).copy()
        d = x - c
        rho2 = np.sum(d * d, axis=-1)[..., None, None]
        eye = np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n))
        dd = d[..., :, None] * d[..., None, :]
        return self.radius ** 2 * (eye / rho2 - 2.0 * dd / rho2 ** 2)

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        if self.kind == "similarity":
            return np.zeros(x.shape[:-1] + (n, n, n))
        c = self.center if self.center is not None else np.zeros(n)
        d = x - c
        rho2 = np.sum(d * d, axis=-1)[..., None, None, None]
        eye = np.eye(n)
        t1 = np.einsum("ia,...b->...iab", eye, d)
        t2 = np.einsum("ib,...a->...iab", eye, d)
        t3 = np.einsum("ab,...i->...iab", eye, d)
        t4 = np.einsum("...i,...a,...b->...iab", d, d, d)
        return self.radius ** 2 * (-2.0 * (t1 + t2 + t3) / rho2 ** 2
                                   + 8.0 * t4 / rho2 ** 3)

    def orientation_reversing(self, n: int) -> bool:
        return self.kind == "inversion"


def apply_moebius(surface, mmap: MoebiusMap):
    """Image surface under the Moebius map (charts composed; vertices mapped).

    Raises SingularMapError when an inversion center lies on the surface.
    The n-dimensional orientation flips under inversion, which is consistent
    across the whole image; combined angles are insensitive to a global flip.
    """
    if isinstance(surface, TriMesh):
        if mmap.kind == "inversion":
            dmin = np.min(np.linalg.norm(surface.vertices - mmap.center, axis=-1))
            if dmin < 1e-9:
                raise SingularMapError("inversion center lies on the mesh")
        return surface.with_vertices(mmap.value(surface.vertices))
    if isinstance(surface, ChartSurface):
        if mmap.kind == "inversion":
            pts = surface.quadrature(0.25).points
            dmin = np.min(np.linalg.norm(pts - mmap.center, axis=-1))
            if dmin < 1e-6:
                raise SingularMapError("inversion center lies on the surface")
        hess = None if mmap.kind == "similarity" else mmap.hessian
        return transform_surface(surface, mmap.value, mmap.jacobian, hess,
                                 name=f"{mmap.kind}({surface.name})")
    raise UnsupportedInputError(f"unsupported surface type {type(surface)!r}")


# ----------------------------------------------------------------------
# invariance checks
# ----------------------------------------------------------------------

@dataclass
class InvarianceReport:
    energy_original: float
    energy_transformed: float
    rel_difference: float
    refined_rel_difference: float | None
    map_kind: str
    selector: str
    map_params: dict = None

    def as_dict(self):
        return {
            "energy_original": self.energy_original,
            "energy_transformed": self.energy_transformed,
            "rel_difference": self.rel_difference,
            "refined_rel_difference": self.refined_rel_difference,
            "map": self.map_kind,
            "map_params": self.map_params,
            "selector": self.selector,
        }

    def to_json(self, **kw):
        return json.dumps(self.as_dict(), sort_keys=True, **kw)


def moebius_invariance_check(surface, mmap: MoebiusMap, selector="ks",
                             s: float = 0.0,
                             config: QuadratureConfig | None = None,
                             refine=True) -> InvarianceReport:
    """Numerically compare E(M) with E(T(M)) and report the refinement trend.

    selector is "ks" or "as" (the latter with its linear parameter s).
    """
    config = config or QuadratureConfig()
    image = apply_moebius(surface, mmap)

    def energy(surf, cfg, scl):
        if selector == "ks":
            return ks_energy(surf, cfg, scale=scl).value
        if selector == "as":
            return as_energy(surf, s, cfg).value
        raise PreconditionError(f"unknown selector {selector!r}")

    base_scale = 0.5
    e0 = energy(surface, config, base_scale)
    e1 = energy(image, config, base_scale)
    denom = max(abs(e0), abs(e1), 1e-30)
    rel = abs(e0 - e1) / denom
    refined_rel = None
    if refine:
        cfg2 = config.refined(1.5)
        e0r = energy(surface, cfg2, base_scale * 1.5)
        e1r = energy(image, cfg2, base_scale * 1.5)
        refined_rel = abs(e0r - e1r) / max(abs(e0r), abs(e1r), 1e-30)
    params = {"kind": mmap.kind, "scale": mmap.scale, "radius": mmap.radius}
    if mmap.center is not None:
        params["center"] = [float(c) for c in mmap.center]
    return InvarianceReport(
        energy_original=e0, energy_transformed=e1, rel_difference=rel,
        refined_rel_difference=refined_rel, map_kind=mmap.kind,
        selector=f"as(s={s})" if selector == "as" else "ks",
        map_params=params,
    )
