"""Degeneration laboratory: model integrals near double points and two-body
blow-up sweeps with exponent/log-law fitting.

Three local models of a double point are measured: orthogonal sheets
(kernel (t^2+s^2)^(a/2) with both area factors), a sphere tangent to a plane
(gap profile (rho/2)^4 + r^2), and a double cone (kernel (r+rho)^a). Each is
integrated with an inner cutoff and the cutoff law classified as finite,
logarithmic, or power growth. The two-body sweep measures the cross
interaction of two round m-spheres at gap delta and compares it with the
annulus-pair lower bound lambda(delta, rho) summed over dyadic scales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .quadrature import compensated_sum, gauss_legendre

__all__ = [
    "DegenerationFamily",
    "BlowupPrediction",
    "CutoffFit",
    "classify_cutoff_law",
    "orthogonal_model_integral",
    "OrthogonalModelResult",
    "tangent_model_scan",
    "cone_model_scan",
    "two_body_sweep",
    "TwoBodySweepResult",
    "lambda_bound",
    "lambda_bound_sum",
    "unit_ball_volume",
]


def unit_ball_volume(m: int) -> float:
    """Volume of the unit m-ball (2 for m=1, pi for m=2, ...)."""
    return math.pi ** (m / 2.0) / math.gamma(m / 2.0 + 1.0)


@dataclass
class DegenerationFamily:
    """Parametrized two-patch configuration approaching a double point."""

    kind: str                    # two-spheres-gap | orthogonal-planes |
                                 # tangent-sphere-plane | double-cone
    alpha: float
    gap: float = 0.0             # delta
    radius: float = 1.0          # sphere radius / patch extent rho or R
    m: int = 2

    def __post_init__(self):
        kinds = ("two-spheres-gap", "orthogonal-planes",
                 "tangent-sphere-plane", "double-cone")
        if self.kind not in kinds:
            raise PreconditionError(f"unknown family kind {self.kind!r}")
        if self.kind == "two-spheres-gap" and self.gap <= 0:
            raise PreconditionError("embedded two-sphere family needs gap > 0")
        if self.radius <= 0:
            raise PreconditionError("patch extent must be positive")

    def prediction(self) -> "BlowupPrediction":
        a, m = self.alpha, self.m
        if self.kind == "two-spheres-gap":
            if a < -2 * m:
                return BlowupPrediction("power", 2 * m + a, m)
            if a == -2 * m:
                return BlowupPrediction("logarithmic", 0.0, m)
            return BlowupPrediction("finite-limit", 0.0, m)
        if self.kind == "orthogonal-planes":
            threshold = -4.0
        elif self.kind == "tangent-sphere-plane":
            threshold = -3.0
        else:
            threshold = -4.0
        if a > threshold:
            return BlowupPrediction("finite-limit", 0.0, m)
        if a == threshold:
            return BlowupPrediction("logarithmic", 0.0, m)
        expo = {"orthogonal-planes": a + 4.0,
                "tangent-sphere-plane": 2.0 * a + 6.0,
                "double-cone": a + 4.0}[self.kind]
        return BlowupPrediction("power", expo, m)


@dataclass
class BlowupPrediction:
    """Predicted cutoff/blow-up law for a degeneration family."""

    law: str          # power | logarithmic | finite-limit
    exponent: float
    m: int

    @property
    def c1(self) -> float:
        """Annulus volume constant 0.9 (1 - 2^-m) Vol(B^m)."""
        return 0.9 * (1.0 - 0.5 ** self.m) * unit_ball_volume(self.m)


# ----------------------------------------------------------------------
# cutoff-law classification
# ----------------------------------------------------------------------

@dataclass
class CutoffFit:
    """Classification of V(cutoff) as the cutoff shrinks to zero."""

    law: str                    # finite | log | power
    exponent: float             # power-law exponent of V (0 for log/finite)
    r2: float
    cutoffs: np.ndarray
    values: np.ndarray
    limit: float | None = None  # extrapolated limit when finite
    log_coefficient: float | None = None

    def as_dict(self):
        return {
            "law": self.law,
            "exponent": self.exponent,
            "r2": self.r2,
            "cutoffs": [float(c) for c in self.cutoffs],
            "values": [float(v) for v in self.values],
            "limit": self.limit,
            "log_coefficient": self.log_coefficient,
        }


def _linfit(x, y):
    A = np.stack([x, np.ones_like(x)], axis=-1)
    sol, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ sol
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return sol[0], sol[1], r2, ss_res


def classify_cutoff_law(cutoffs, values, finite_ratio=0.8,
                        residual_ratio=4.0) -> CutoffFit:
    """Classify V(cutoff) growth from samples at decreasing cutoffs.

    Finiteness is detected on the increments between consecutive cutoffs
    (which cancels any additive constant): geometrically shrinking
    increments (every ratio below finite_ratio) mean a finite limit,
    extrapolated by summing the geometric tail. Otherwise two least-squares
    models compete, V linear in log(1/cutoff) versus log V linear in log
    cutoff, selected when one R^2 deficit is at least residual_ratio times
    smaller, else by the better fit.
    """
    cut = np.asarray(cutoffs, dtype=float)
    val = np.asarray(values, dtype=float)
    if len(cut) < 3:
        raise PreconditionError("need at least 3 cutoff samples")
    if np.any(np.diff(cut) >= 0):
        raise PreconditionError("cutoffs must be strictly decreasing")
    inc = np.abs(np.diff(val))
    scale = np.max(np.abs(val))
    inc = np.maximum(inc, 1e-300)
    ratios = inc[1:] / inc[:-1]
    if np.all(ratios < finite_ratio) or np.all(inc < 1e-12 * scale):
        limit = float(val[-1] + inc[-1] * ratios[-1] / (1 - ratios[-1])
                      if ratios[-1] < 1 else val[-1])
        return CutoffFit("finite", 0.0, 1.0, cut, val, limit=limit)
    a_log, _, r2_log, _ = _linfit(np.log(1.0 / cut), val)
    if np.all(val > 0):
        p, _, r2_pow, _ = _linfit(np.log(cut), np.log(val))
    else:
        p, r2_pow = math.nan, -math.inf
    d_log = max(1.0 - r2_log, 1e-15)
    d_pow = max(1.0 - r2_pow, 1e-15)
    if d_log * residual_ratio <= d_pow:
        return CutoffFit("log", 0.0, r2_log, cut, val,
                         log_coefficient=float(a_log))
    if d_pow * residual_ratio <= d_log or d_pow < d_log:
        return CutoffFit("power", float(p), r2_pow, cut, val)
    return CutoffFit("log", 0.0, r2_log, cut, val,
                     log_coefficient=float(a_log))


# ----------------------------------------------------------------------
# model integrals
# ----------------------------------------------------------------------

def _dyadic_shell_sums_2d(f, outer, levels, gl_order=12):
    """Integrals of f over dyadic L-shells of [0, outer]^2 (smooth per box)."""
    xg, wg = np.polynomial.legendre.leggauss(gl_order)

    def box(x0, x1, y0, y1):
        xs = 0.5 * (x1 - x0) * (xg + 1.0) + x0
        ys = 0.5 * (y1 - y0) * (xg + 1.0) + y0
        wx = 0.5 * (x1 - x0) * wg
        wy = 0.5 * (y1 - y0) * wg
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return float(np.einsum("i,j,ij->", wx, wy, f(X, Y)))

    sums = []
    hi = float(outer)
    for _ in range(levels):
        lo = 0.5 * hi
        sums.append(box(lo, hi, lo, hi) + box(lo, hi, 0.0, lo)
                    + box(0.0, lo, lo, hi))
        hi = lo
    return np.array(sums)


@dataclass
class OrthogonalModelResult:
    value: float
    diverged: bool
    alpha: float
    rho: float
    shell_sums: np.ndarray = field(repr=False, default=None)
    cutoff_fit: CutoffFit | None = None


def orthogonal_model_closed_form(alpha: float, rho: float) -> float:
    """8 pi^2 rho^(a+4) (sqrt(2)^(a+2) - 1) / ((a+2)(a+4)), a > -4.

    At a = -2 the printed constant degenerates; the analytic limit replaces
    (sqrt(2)^(a+2) - 1)/(a+2) by log(sqrt(2)).
    """
    a = float(alpha)
    if a <= -4.0:
        raise PreconditionError("closed form diverges for alpha <= -4")
    if abs(a + 2.0) < 1e-12:
        frac = 0.5 * math.log(2.0)
    else:
        frac = (math.sqrt(2.0) ** (a + 2.0) - 1.0) / (a + 2.0)
    return 8.0 * math.pi ** 2 * rho ** (a + 4.0) * frac / (a + 4.0)


def orthogonal_model_integral(alpha: float, rho: float = 1.0,
                              levels: int = 60, tol: float = 1e-9,
                              gl_order: int = 12) -> OrthogonalModelResult:
    """Interaction of two orthogonal flat sheets meeting at a point.

    Numerically integrates (t^2+s^2)^(a/2) (2 pi)^2 t s over [0, rho]^2 by
    dyadic shells toward the origin. Shell sums decay geometrically exactly
    when a > -4; otherwise the result carries a divergence flag and the
    cutoff study instead of a value.
    """
    a = float(alpha)

    def f(t, s):
        return (t ** 2 + s ** 2) ** (a / 2.0) * (2.0 * math.pi) ** 2 * t * s

    sums = _dyadic_shell_sums_2d(f, rho, levels, gl_order)
    ratios = sums[1:] / sums[:-1]
    tail_ratio = float(np.median(ratios[-8:]))
    cutoffs = rho * 0.5 ** np.arange(1, levels + 1)
    partial = np.cumsum(sums)
    if tail_ratio < 1.0 - 1e-6:
        # geometric tail extrapolation
        total = float(partial[-1] + sums[-1] * tail_ratio / (1.0 - tail_ratio))
        return OrthogonalModelResult(value=total, diverged=False, alpha=a,
                                     rho=rho, shell_sums=sums)
    take = slice(levels - 24, levels, 4)
    fit = classify_cutoff_law(cutoffs[take], partial[take])
    return OrthogonalModelResult(value=math.inf, diverged=True, alpha=a,
                                 rho=rho, shell_sums=sums, cutoff_fit=fit)


def tangent_model_scan(alpha: float, extent: float = 0.5,
                       cutoffs=None, gl_order: int = 16) -> CutoffFit:
    """Cutoff study of the tangential double-point model.

    Integrand ((rho/2)^4 + r^2)^(a/2) r rho over [cutoff, R] x [0, R]; the
    squared-gap profile (rho/2)^4 models a sphere resting on a plane. The
    r integral is taken numerically on dyadic panels graded toward r = 0,
    which resolves the r ~ rho^2 concentration scale.
    """
    a = float(alpha)
    R = float(extent)
    if R > 1.0:
        raise PreconditionError("model extent must satisfy R <= 1")
    if cutoffs is None:
        cutoffs = R * 10.0 ** -np.arange(1, 6, dtype=float)
    cutoffs = np.asarray(cutoffs, dtype=float)

    def inner_r(rho):
        # integral over r in [0, R] for a batch of rho
        A2 = (rho / 2.0) ** 4
        total = np.zeros_like(rho)
        # graded dyadic panels down to the concentration scale
        levels = max(8, int(math.ceil(math.log2(R / max(np.min(A2) ** 0.5, 1e-14)))) + 2)
        hi = R
        xg, wg = np.polynomial.legendre.leggauss(gl_order)
        for _ in range(levels):
            lo = 0.5 * hi
            rs = 0.5 * (hi - lo) * (xg + 1.0) + lo
            ws = 0.5 * (hi - lo) * wg
            vals = (A2[:, None] + rs[None, :] ** 2) ** (a / 2.0) * rs[None, :]
            total += vals @ ws
            hi = lo
        # remaining [0, hi]: integrand ~ A2^(a/2) r there
        total += (A2 + hi ** 2 * 0.25) ** (a / 2.0) * 0.5 * hi ** 2
        return total

    def value(cut):
        # outer integral over rho in [cut, R], graded toward cut
        edges = np.geomspace(cut, R, 40)
        xg, wg = np.polynomial.legendre.leggauss(gl_order)
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            rh = 0.5 * (hi - lo) * (xg + 1.0) + lo
            wh = 0.5 * (hi - lo) * wg
            total += float(np.sum(inner_r(rh) * rh * wh))
        return total

    vals = np.array([value(c) for c in cutoffs])
    return classify_cutoff_law(cutoffs, vals)


def cone_model_scan(alpha: float, cutoffs=None, gl_order: int = 12,
                    levels_extra: int = 4) -> CutoffFit:
    """Cutoff study of the double-cone interaction model.

    Integrand (r + rho)^a rho r over [0,1]^2 minus the dyadic corner
    max(r, rho) < cutoff; finite iff a > -4 with power law a + 4 below.
    """
    a = float(alpha)
    if cutoffs is None:
        cutoffs = 10.0 ** -np.arange(1, 6, dtype=float)
    cutoffs = np.asarray(cutoffs, dtype=float)

    def f(r, rho):
        return (r + rho) ** a * r * rho

    levels = int(math.ceil(-math.log2(np.min(cutoffs)))) + levels_extra
    sums = _dyadic_shell_sums_2d(f, 1.0, levels, gl_order)
    shell_edges = 0.5 ** np.arange(1, levels + 1)
    vals = []
    for cut in cutoffs:
        # shells fully outside the cutoff corner
        keep = shell_edges >= cut
        vals.append(float(np.sum(sums[keep])))
    return classify_cutoff_law(cutoffs, np.asarray(vals))


# ----------------------------------------------------------------------
# two-body sweeps
# ----------------------------------------------------------------------

def lambda_bound(m: int, alpha: float, delta: float, rho: float) -> float:
    """Annulus-pair interaction lower bound 2^a c1^2 rho^(2m+a) (1+d/rho)^a."""
    if delta <= 0 or rho <= 0:
        raise PreconditionError("lambda bound needs delta, rho > 0")
    c1 = 0.9 * (1.0 - 0.5 ** m) * unit_ball_volume(m)
    return (2.0 ** alpha * c1 ** 2 * rho ** (2 * m + alpha)
            * (1.0 + delta / rho) ** alpha)


def lambda_bound_sum(m: int, alpha: float, delta: float, rho0: float,
                     terms: int = 80) -> float:
    """Sum of lambda over the dyadic annulus cascade rho0 / 2^j."""
    return compensated_sum(
        lambda_bound(m, alpha, delta, rho0 / 2.0 ** j) for j in range(terms))


def _sphere_pair_nodes(m: int, radius: float, gap: float, n_polar: int,
                       n_azimuth: int):
    """Quadrature for two round m-spheres with poles facing across the gap.

    Returns (points_a, weights_a, points_b, weights_b). Gauss-Legendre in
    the polar cosine clusters nodes at the facing poles, resolving the
    near-contact concentration scale sqrt(gap * radius).
    """
    r = float(radius)
    if m == 1:
        # two GL panels meeting at theta = 0, the facing point
        n_half = max(16, n_polar)
        t1, w1 = gauss_legendre(n_half, -math.pi, 0.0)
        t2, w2 = gauss_legendre(n_half, 0.0, math.pi)
        th = np.concatenate([t1, t2])
        w = np.concatenate([w1, w2])
        pa = r * np.stack([np.cos(th), np.sin(th)], axis=-1)
        pa[:, 0] -= (r + gap / 2.0)
        pb = pa.copy()
        pb[:, 0] = -pb[:, 0]
        return pa, w * r, pb, w * r
    x, wx = np.polynomial.legendre.leggauss(n_polar)
    theta = np.arccos(x[::-1])
    wth = wx[::-1]                      # weight already in d(cos theta)
    phi = 2.0 * math.pi * np.arange(n_azimuth) / n_azimuth
    wph = np.full(n_azimuth, 2.0 * math.pi / n_azimuth)
    T, P = np.meshgrid(theta, phi, indexing="ij")
    W = np.outer(wth, wph).ravel() * r ** 2
    # pole theta=0 along +x; sphere A centered at x = -(r + gap/2)
    pts = np.stack([np.cos(T.ravel()),
                    np.sin(T.ravel()) * np.cos(P.ravel()),
                    np.sin(T.ravel()) * np.sin(P.ravel())], axis=-1) * r
    pa = pts.copy()
    pa[:, 0] -= (r + gap / 2.0)
    pb = pts.copy()
    pb[:, 0] = -pb[:, 0] + (r + gap / 2.0) + 0.0
    return pa, W, pb, W


def sphere_pair_cross_energy_bruteforce(m: int, alpha: float, radius: float,
                                        gap: float, n_polar: int = 48,
                                        n_azimuth: int = 96) -> float:
    """Cross interaction by direct product quadrature (validation route).

    Resolves the near-contact concentration only while the polar node
    spacing at the facing poles stays below the gap; the reduced evaluator
    below is the accurate route for small gaps.
    """
    if gap <= 0:
        raise PreconditionError("gap must be positive (touching spheres are "
                                "handled by the model scans)")
    pa, wa, pb, wb = _sphere_pair_nodes(m, radius, gap, n_polar, n_azimuth)
    total = 0.0
    block = 1024
    for lo in range(0, len(pa), block):
        d = np.linalg.norm(pa[lo:lo + block, None, :] - pb[None, :, :], axis=-1)
        total += float(wa[lo:lo + block] @ d ** alpha @ wb)
    return total


def _graded_panels_1d(a: float, b: float, feature: float, order: int = 16):
    """GL panels on [a, b] dyadically graded toward a down to `feature`."""
    edges = [b]
    while edges[-1] - a > feature:
        edges.append(a + 0.5 * (edges[-1] - a))
    edges.append(a)
    xg, wg = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for hi, lo in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (hi - lo) * (xg + 1.0) + lo)
        weights.append(0.5 * (hi - lo) * wg)
    return np.concatenate(nodes), np.concatenate(weights)


def sphere_pair_cross_energy(m: int, alpha: float, radius: float, gap: float,
                             order: int = 16) -> float:
    """Cross interaction of two round m-spheres at the given gap.

    For m = 2 the inner integral over one sphere reduces exactly to a 1D
    power integral (the surface measure between chord distances is linear
    in t^2 from any external point), leaving a single well-graded outer
    integral; m = 1 uses a graded 2D product rule. Both resolve arbitrarily
    small gaps.
    """
    if gap <= 0:
        raise PreconditionError("gap must be positive (touching spheres are "
                                "handled by the model scans)")
    r = float(radius)
    a = float(alpha)
    L = 2.0 * r + gap
    if m == 2:
        # inner sphere integral from distance D: (2 pi r / D) *
        # integral_(D-r)^(D+r) t^(alpha+1) dt
        def inner(D):
            if abs(a + 2.0) < 1e-12:
                return (2.0 * math.pi * r / D) * (np.log(D + r) - np.log(D - r))
            return (2.0 * math.pi * r / D) * ((D + r) ** (a + 2.0)
                                              - (D - r) ** (a + 2.0)) / (a + 2.0)

        s, ws = _graded_panels_1d(0.0, 2.0, gap / r * 1e-3, order)  # s = 1 - u
        D = np.sqrt(L ** 2 - 2.0 * L * r * (1.0 - s) + r ** 2)
        vals = inner(D)
        return float(2.0 * math.pi * r ** 2 * np.dot(ws, vals))
    if m == 1:
        th, wt = _graded_panels_1d(0.0, math.pi, gap / r * 1e-3, order)
        th = np.concatenate([-th[::-1], th])
        wt = np.concatenate([wt[::-1], wt])
        ca = np.stack([r * np.cos(th) - (r + gap / 2.0), r * np.sin(th)],
                      axis=-1)
        cb = np.stack([(r + gap / 2.0) - r * np.cos(th), r * np.sin(th)],
                      axis=-1)
        d = np.linalg.norm(ca[:, None, :] - cb[None, :, :], axis=-1)
        return float((r * wt) @ d ** a @ (r * wt))
    raise PreconditionError("two-body sweeps support m in {1, 2}")


@dataclass
class TwoBodySweepResult:
    m: int
    alpha: float
    radius: float
    gaps: np.ndarray
    energies: np.ndarray
    lambda_sums: np.ndarray
    law: str
    exponent: float | None
    r2: float
    dominates_bound: bool

    def as_dict(self):
        return {
            "m": self.m, "alpha": self.alpha, "radius": self.radius,
            "gaps": [float(g) for g in self.gaps],
            "energies": [float(e) for e in self.energies],
            "lambda_sums": [float(s) for s in self.lambda_sums],
            "law": self.law, "exponent": self.exponent, "r2": self.r2,
            "dominates_bound": self.dominates_bound,
        }


def two_body_sweep(m: int, alpha: float, radius: float, gaps,
                   order: int = 16) -> TwoBodySweepResult:
    """Cross-energy sweep over shrinking gaps with blow-up law fitting.

    alpha = -2m fits energy against log(1/gap) (reporting R^2); alpha < -2m
    fits a power law in the gap. The annulus cascade bound
    sum_j lambda(gap, rho0/2^j) is reported alongside (rho0 = min(radius, 1),
    the largest scale on which the annulus volume estimate is valid); its
    own fits follow the count-of-scales law, log(1/gap) at the critical
    exponent and gap^(2m+alpha) below it. The measured energy dominates the
    bound at every gap but blows up faster: a near-diagonal scaling of the
    facing caps gives gap^(alpha + 3m/2) for alpha < -3m/2, which the fit
    reports honestly.
    """
    gaps = np.asarray(sorted(gaps, reverse=True), dtype=float)
    if np.any(gaps <= 0):
        raise PreconditionError("gaps must be positive and decreasing")
    energies = np.array([sphere_pair_cross_energy(m, alpha, radius, g, order)
                         for g in gaps])
    rho0 = min(radius, 1.0)
    lam = np.array([lambda_bound_sum(m, alpha, g, rho0) for g in gaps])
    dominates = bool(np.all(energies >= lam))
    if abs(alpha + 2 * m) < 1e-12:
        slope, _, r2, _ = _linfit(np.log(1.0 / gaps), energies)
        return TwoBodySweepResult(m, alpha, radius, gaps, energies, lam,
                                  "logarithmic", None, r2, dominates)
    if alpha < -2 * m:
        slope, _, r2, _ = _linfit(np.log(gaps), np.log(energies))
        return TwoBodySweepResult(m, alpha, radius, gaps, energies, lam,
                                  "power", float(slope), r2, dominates)
    slope, _, r2, _ = _linfit(np.log(gaps), energies)
    return TwoBodySweepResult(m, alpha, radius, gaps, energies, lam,
                              "bounded", None, r2, dominates)
