"""Parametric road surfaces: samples, built-in analytic shapes, spline tracks.

A road is a regular parametric surface ``x(s, y)`` with ``s`` running along
the track (periodic for closed circuits) and ``y`` across it. Everything the
vehicle model needs at a point is collected in a :class:`SurfaceSample`:
position, tangent and second-derivative vectors, the unit normal, and the
first/second fundamental forms.

Evaluators are pure functions of ``(s, y)`` and accept batched arrays or dual
numbers for ``y`` (``s`` is always plain), so the optimizer can differentiate
through the geometry.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import make_interp_spline

from . import ad
from .errors import DomainError, RegularityError, TrackFormatError, TrackValidationError

MIN_CROSS_NORM = 1e-9
THETA_P_MARGIN = 1e-6

TRACK_FORMAT_VERSION = 1


@dataclass
class SurfaceSample:
    """Geometric quantities of the surface at one ``(s, y)`` point.

    ``form1`` and ``form2`` are the first and second fundamental forms as 2x2
    nested tuples; ``theta_p`` is the tangent-skew angle with
    ``sin(theta_p) = -(x_s . x_y) / (|x_s| |x_y|)``.
    """

    s: object
    y: object
    position: tuple
    x_s: tuple
    x_y: tuple
    x_ss: tuple
    x_sy: tuple
    x_yy: tuple
    normal: tuple
    form1: tuple
    form2: tuple
    norm_xs: object
    norm_xy: object
    theta_p: object


@dataclass
class SurfaceDefinition:
    """A parametric road surface plus its parameter domain.

    ``evaluator(s, y)`` must return a :class:`SurfaceSample` and be safe to
    call concurrently; ``y_bounds(s)`` gives the lateral domain at ``s``.
    """

    name: str
    s_length: float
    periodic: bool
    y_bounds: Callable
    evaluator: Callable
    metadata: dict = field(default_factory=dict)


def build_sample(s, y, position, x_s, x_y, x_ss, x_sy, x_yy, check: bool = True) -> SurfaceSample:
    """Assemble a SurfaceSample from position/derivative vectors.

    Derived quantities follow the fixed orientation convention
    ``normal = (x_s x x_y) / |x_s x x_y|`` (track specs must order parameters
    so the normal points away from the ground).
    """
    cross = ad.cross3(x_s, x_y)
    cross_norm = ad.norm3(cross)
    if check:
        cn = np.min(ad.value_of(cross_norm))
        if not np.isfinite(cn) or cn < MIN_CROSS_NORM:
            raise RegularityError(
                f"degenerate tangents at (s={_fmt(s)}, y={_fmt(y)}): |x_s x x_y| = {cn:.3e}"
            )
    inv_norm = 1.0 / cross_norm
    normal = ad.scale3(inv_norm, cross)

    e = ad.dot3(x_s, x_s)
    f = ad.dot3(x_s, x_y)
    g = ad.dot3(x_y, x_y)
    norm_xs = ad.sqrt(e)
    norm_xy = ad.sqrt(g)
    theta_p = -ad.asin(f / (norm_xs * norm_xy))
    if check:
        tp = np.max(np.abs(ad.value_of(theta_p)))
        if tp >= math.pi / 2 - THETA_P_MARGIN:
            raise RegularityError(
                f"tangent skew too large at (s={_fmt(s)}, y={_fmt(y)}): |theta_p| = {tp:.6f}"
            )

    form1 = ((e, f), (f, g))
    l = ad.dot3(x_ss, normal)
    m = ad.dot3(x_sy, normal)
    n = ad.dot3(x_yy, normal)
    form2 = ((l, m), (m, n))
    return SurfaceSample(
        s=s, y=y, position=position,
        x_s=x_s, x_y=x_y, x_ss=x_ss, x_sy=x_sy, x_yy=x_yy,
        normal=normal, form1=form1, form2=form2,
        norm_xs=norm_xs, norm_xy=norm_xy, theta_p=theta_p,
    )


def _fmt(x):
    v = ad.value_of(x)
    try:
        return f"{float(v):.4f}"
    except (TypeError, ValueError):
        return str(np.asarray(v).ravel()[:3])


def wrap_s(surface: SurfaceDefinition, s):
    """Reduce s modulo the period for periodic surfaces."""
    if surface.periodic:
        return np.mod(s, surface.s_length)
    return s


def evaluate_surface(surface: SurfaceDefinition, s, y) -> SurfaceSample:
    """Evaluate the surface with domain checks; s is reduced modulo the period.

    Raises DomainError outside the lateral bounds and RegularityError where
    the parametrization degenerates.
    """
    s = wrap_s(surface, s)
    sv = np.asarray(ad.value_of(s), dtype=float)
    if not surface.periodic:
        if np.any(sv < -1e-12) or np.any(sv > surface.s_length + 1e-12):
            raise DomainError(f"s = {_fmt(s)} outside [0, {surface.s_length}]")
    ymin, ymax = surface.y_bounds(sv)
    yv = np.asarray(ad.value_of(y), dtype=float)
    if np.any(yv < np.asarray(ymin) - 1e-12) or np.any(yv > np.asarray(ymax) + 1e-12):
        raise DomainError(f"y = {_fmt(y)} outside [{np.min(ymin)}, {np.max(ymax)}] at s = {_fmt(s)}")
    return surface.evaluator(s, y)


# ---------------------------------------------------------------------------
# built-in analytic surfaces (exact derivatives, used as test oracles)
# ---------------------------------------------------------------------------


def plane(length: float = 1000.0, half_width: float = 50.0) -> SurfaceDefinition:
    """Flat plane x = (s, y, 0)."""

    def evaluator(s, y):
        zero = 0.0 * (s + y)
        one = zero + 1.0
        return build_sample(
            s, y,
            position=(s + 0.0 * y, y + 0.0 * s, zero),
            x_s=(one, zero, zero),
            x_y=(zero, one, zero),
            x_ss=(zero, zero, zero),
            x_sy=(zero, zero, zero),
            x_yy=(zero, zero, zero),
        )

    return SurfaceDefinition(
        name="plane", s_length=length, periodic=False,
        y_bounds=lambda s: (-half_width, half_width), evaluator=evaluator,
    )


def cylinder(radius: float, valley: bool = True, half_width: float = 20.0) -> SurfaceDefinition:
    """Circular cylinder with y along the axis, parametrized by arclength in s.

    ``valley=True`` curves upward away from the rider (inside of a pipe,
    form2_ss = +1/R); ``valley=False`` is a crest (form2_ss = -1/R).
    """
    R = float(radius)
    sgn = 1.0 if valley else -1.0

    def evaluator(s, y):
        phi = s / R
        zero = 0.0 * (s + y)
        cp, sp = ad.cos(phi + 0.0 * y), ad.sin(phi + 0.0 * y)
        return build_sample(
            s, y,
            position=(R * sp, y + 0.0 * s, sgn * R * (1.0 - cp)),
            x_s=(cp, zero, sgn * sp),
            x_y=(zero, zero + 1.0, zero),
            x_ss=(-sp / R, zero, sgn * cp / R),
            x_sy=(zero, zero, zero),
            x_yy=(zero, zero, zero),
        )

    return SurfaceDefinition(
        name="cylinder", s_length=2.0 * math.pi * R, periodic=True,
        y_bounds=lambda s: (-half_width, half_width), evaluator=evaluator,
    )


def sphere_patch(radius: float, half_width: float | None = None) -> SurfaceDefinition:
    """Sphere parametrized by arclength along the equator, y toward the poles."""
    R = float(radius)
    if half_width is None:
        half_width = 0.4 * R

    def evaluator(s, y):
        phi = s / R
        psi = y / R
        cphi, sphi = ad.cos(phi + 0.0 * y), ad.sin(phi + 0.0 * y)
        cpsi, spsi = ad.cos(psi + 0.0 * s), ad.sin(psi + 0.0 * s)
        pos = (R * cphi * cpsi, R * sphi * cpsi, R * spsi)
        x_s = (-sphi * cpsi, cphi * cpsi, 0.0 * cpsi)
        x_y = (-cphi * spsi, -sphi * spsi, cpsi)
        x_ss = (-cphi * cpsi / R, -sphi * cpsi / R, 0.0 * cpsi)
        x_sy = (sphi * spsi / R, -cphi * spsi / R, 0.0 * cpsi)
        x_yy = (-cphi * cpsi / R, -sphi * cpsi / R, -spsi / R)
        return build_sample(s, y, pos, x_s, x_y, x_ss, x_sy, x_yy)

    return SurfaceDefinition(
        name="sphere_patch", s_length=2.0 * math.pi * R, periodic=True,
        y_bounds=lambda s: (-half_width, half_width), evaluator=evaluator,
    )


def flat_ring(radius: float, half_width: float = 10.0) -> SurfaceDefinition:
    """Flat circular ring; s is centerline arclength, y > 0 points inward."""
    R0 = float(radius)

    def evaluator(s, y):
        phi = s / R0
        cp, sp = ad.cos(phi + 0.0 * y), ad.sin(phi + 0.0 * y)
        rho = R0 - y
        w = rho / R0
        zero = 0.0 * (s + y)
        return build_sample(
            s, y,
            position=(rho * cp, rho * sp, zero),
            x_s=(-w * sp, w * cp, zero),
            x_y=(-cp, -sp, zero),
            x_ss=(-w * cp / R0, -w * sp / R0, zero),
            x_sy=(sp / R0, -cp / R0, zero),
            x_yy=(zero, zero, zero),
        )

    return SurfaceDefinition(
        name="flat_ring", s_length=2.0 * math.pi * R0, periodic=True,
        y_bounds=lambda s: (-half_width, half_width), evaluator=evaluator,
    )


def banked_ring(radius: float, bank: float, half_width: float = 10.0) -> SurfaceDefinition:
    """Circular ring with constant banking; the normal leans outward by ``bank``."""
    R0 = float(radius)
    cb, sb = math.cos(bank), math.sin(bank)

    def evaluator(s, y):
        phi = s / R0
        cp, sp = ad.cos(phi + 0.0 * y), ad.sin(phi + 0.0 * y)
        rho = R0 - y * cb
        w = rho / R0
        zero = 0.0 * (s + y)
        return build_sample(
            s, y,
            position=(rho * cp, rho * sp, y * sb + zero),
            x_s=(-w * sp, w * cp, zero),
            x_y=(-cb * cp, -cb * sp, zero + sb),
            x_ss=(-w * cp / R0, -w * sp / R0, zero),
            x_sy=(cb * sp / R0, -cb * cp / R0, zero),
            x_yy=(zero, zero, zero),
        )

    return SurfaceDefinition(
        name="banked_ring", s_length=2.0 * math.pi * R0, periodic=True,
        y_bounds=lambda s: (-half_width, half_width), evaluator=evaluator,
    )


# ---------------------------------------------------------------------------
# spline track importer
# ---------------------------------------------------------------------------


def load_track(path) -> SurfaceDefinition:
    """Read a track definition JSON file and build its surface."""
    with open(path) as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TrackFormatError(f"{path}: invalid JSON ({exc})") from exc
    return build_track(spec)


def _require(spec, key, types, path):
    if key not in spec:
        raise TrackFormatError(f"{path}.{key}: missing")
    v = spec[key]
    if not isinstance(v, types):
        raise TrackFormatError(f"{path}.{key}: expected {types}, got {type(v).__name__}")
    return v


def _as_float(v, path):
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
        raise TrackFormatError(f"{path}: expected finite number, got {v!r}")
    return float(v)


def build_track(spec: dict) -> SurfaceDefinition:
    """Build a C2 surface from a track definition dictionary.

    The track format (``"format": 1``) is a periodic centerline of 3D control
    points interpolated by a degree-5 spline, plus an s-varying lateral
    cross-section polynomial ``z_offset(y) = sum_j a_j(s) y^j`` (degree <= 4)
    whose coefficients are splined over the same knots. ``width`` gives the
    lateral domain, either as a scalar full width, a ``[ymin, ymax]`` pair, or
    one pair per knot.
    """
    if not isinstance(spec, dict):
        raise TrackFormatError("track: expected a JSON object")
    fmt = _require(spec, "format", int, "track")
    if fmt != TRACK_FORMAT_VERSION:
        raise TrackFormatError(f"track.format: unsupported version {fmt}")
    name = _require(spec, "name", str, "track")
    periodic = _require(spec, "periodic", bool, "track")
    raw_pts = _require(spec, "centerline", list, "track")
    if len(raw_pts) < 4:
        raise TrackFormatError(f"track.centerline: need >= 4 control points, got {len(raw_pts)}")
    pts = np.empty((len(raw_pts), 3))
    for i, p in enumerate(raw_pts):
        if not isinstance(p, (list, tuple)) or len(p) != 3:
            raise TrackFormatError(f"track.centerline[{i}]: expected [x, y, z]")
        for j in range(3):
            pts[i, j] = _as_float(p[j], f"track.centerline[{i}][{j}]")

    raw_cs = spec.get("cross_section")
    if raw_cs is None:
        coeffs = np.zeros((len(raw_pts), 5))
    else:
        if not isinstance(raw_cs, list) or len(raw_cs) != len(raw_pts):
            raise TrackFormatError(
                f"track.cross_section: expected one coefficient list per centerline point"
            )
        coeffs = np.zeros((len(raw_pts), 5))
        for i, row in enumerate(raw_cs):
            if not isinstance(row, (list, tuple)) or len(row) > 5:
                raise TrackFormatError(
                    f"track.cross_section[{i}]: expected <= 5 polynomial coefficients"
                )
            for j, cj in enumerate(row):
                coeffs[i, j] = _as_float(cj, f"track.cross_section[{i}][{j}]")

    width = spec.get("width", 10.0)
    knot_spacing = spec.get("knot_spacing")

    # knot parameter: explicit spacing or cumulative chord length
    if knot_spacing is not None:
        ds = _as_float(knot_spacing, "track.knot_spacing")
        if ds <= 0:
            raise TrackFormatError("track.knot_spacing: must be positive")
        t = ds * np.arange(len(raw_pts) + (1 if periodic else 0), dtype=float)
    else:
        closed = np.vstack([pts, pts[:1]]) if periodic else pts
        seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
        if np.any(seg <= 0):
            raise TrackFormatError("track.centerline: coincident consecutive control points")
        t = np.concatenate([[0.0], np.cumsum(seg)])
        if not periodic:
            t = t[: len(pts)]

    if periodic:
        pts_fit = np.vstack([pts, pts[:1]])
        coeffs_fit = np.vstack([coeffs, coeffs[:1]])
        bc = "periodic"
    else:
        pts_fit, coeffs_fit, bc = pts, coeffs, None

    k_center = 5 if len(t) > 6 else 3
    center = make_interp_spline(t, pts_fit, k=k_center, bc_type=bc)
    d1, d2, d3 = center.derivative(1), center.derivative(2), center.derivative(3)
    k_cs = 3 if len(t) > 4 else min(3, len(t) - 1)
    cs_spline = make_interp_spline(t, coeffs_fit, k=k_cs, bc_type=bc)
    cs_d1, cs_d2 = cs_spline.derivative(1), cs_spline.derivative(2)

    length = float(t[-1]) if periodic else float(t[-1] - t[0])

    # lateral bounds
    if isinstance(width, (int, float)):
        w = _as_float(width, "track.width")
        if w <= 0:
            raise TrackFormatError("track.width: must be positive")
        y_lo, y_hi = -0.5 * w, 0.5 * w
        y_bounds = lambda s: (y_lo, y_hi)  # noqa: E731
    elif isinstance(width, list) and len(width) == 2 and isinstance(width[0], (int, float)):
        y_lo = _as_float(width[0], "track.width[0]")
        y_hi = _as_float(width[1], "track.width[1]")
        if y_lo >= y_hi:
            raise TrackFormatError("track.width: ymin must be < ymax")
        y_bounds = lambda s: (y_lo, y_hi)  # noqa: E731
    elif isinstance(width, list) and len(width) == len(raw_pts):
        rows = np.zeros((len(raw_pts), 2))
        for i, row in enumerate(width):
            if not isinstance(row, (list, tuple)) or len(row) != 2:
                raise TrackFormatError(f"track.width[{i}]: expected [ymin, ymax]")
            rows[i, 0] = _as_float(row[0], f"track.width[{i}][0]")
            rows[i, 1] = _as_float(row[1], f"track.width[{i}][1]")
            if rows[i, 0] >= rows[i, 1]:
                raise TrackFormatError(f"track.width[{i}]: ymin must be < ymax")
        wfit = np.vstack([rows, rows[:1]]) if periodic else rows
        wsp = make_interp_spline(t, wfit, k=1, bc_type=None)

        def y_bounds(s):
            b = wsp(np.mod(s, length) if periodic else s)
            b = np.asarray(b)
            return b[..., 0], b[..., 1]
    else:
        raise TrackFormatError("track.width: expected number, [ymin, ymax], or per-knot pairs")

    def evaluator(s, y):
        sv = np.asarray(s, dtype=float)
        c = center(sv)
        c1 = d1(sv)
        c2 = d2(sv)
        c3 = d3(sv)
        a = cs_spline(sv)
        a1 = cs_d1(sv)
        a2 = cs_d2(sv)
        return _ribbon_sample(s, y, c, c1, c2, c3, a, a1, a2)

    surface = SurfaceDefinition(
        name=name, s_length=length, periodic=periodic,
        y_bounds=y_bounds, evaluator=evaluator,
        metadata={"control_points": len(raw_pts)},
    )
    _validate_track_surface(surface)
    return surface


def _poly_eval(a, y, deriv=0):
    """Evaluate sum_j a[..., j] y^j (or its y-derivative) with generic y."""
    n = a.shape[-1]
    acc = None
    for j in range(n - 1, deriv - 1, -1):
        fac = 1.0
        for q in range(deriv):
            fac *= j - q
        term = fac * a[..., j]
        acc = term if acc is None else acc * y + term
    return 0.0 if acc is None else acc


def _ribbon_sample(s, y, c, c1, c2, c3, a, a1, a2):
    """Sample of x(s,y) = C(s) + y*N(s) + z_hat * P(s, y) with N = z x C' normalized."""
    cx = tuple(c[..., i] for i in range(3))
    t1 = tuple(c1[..., i] for i in range(3))
    t2 = tuple(c2[..., i] for i in range(3))
    t3 = tuple(c3[..., i] for i in range(3))

    # u = z_hat x C', and its s-derivatives
    u = (-t1[1], t1[0], 0.0 * t1[0])
    u1 = (-t2[1], t2[0], 0.0 * t2[0])
    u2 = (-t3[1], t3[0], 0.0 * t3[0])
    nrm = ad.norm3(u)
    if np.min(ad.value_of(nrm)) < 1e-9:
        raise RegularityError(f"vertical centerline tangent at s={_fmt(s)}")
    np1 = ad.dot3(u, u1) / nrm
    np2 = (ad.dot3(u1, u1) + ad.dot3(u, u2) - np1 * np1) / nrm
    inv = 1.0 / nrm
    N = ad.scale3(inv, u)
    # N' = u'/n - u n'/n^2 ; N'' = u''/n - 2 u' n'/n^2 + u (2 n'^2 - n n'')/n^3
    N1 = ad.sub3(ad.scale3(inv, u1), ad.scale3(np1 * inv * inv, u))
    N2 = ad.add3(
        ad.sub3(ad.scale3(inv, u2), ad.scale3(2.0 * np1 * inv * inv, u1)),
        ad.scale3((2.0 * np1 * np1 - nrm * np2) * inv * inv * inv, u),
    )

    p = _poly_eval(a, y)
    p_y = _poly_eval(a, y, deriv=1)
    p_yy = _poly_eval(a, y, deriv=2)
    p_s = _poly_eval(a1, y)
    p_sy = _poly_eval(a1, y, deriv=1)
    p_ss = _poly_eval(a2, y)

    zero = 0.0 * (p_y + t1[0])
    position = (cx[0] + y * N[0], cx[1] + y * N[1], cx[2] + y * N[2] + p)
    x_s = (t1[0] + y * N1[0], t1[1] + y * N1[1], t1[2] + y * N1[2] + p_s)
    x_y = (N[0] + zero, N[1] + zero, N[2] + p_y)
    x_ss = (t2[0] + y * N2[0], t2[1] + y * N2[1], t2[2] + y * N2[2] + p_ss)
    x_sy = (N1[0] + zero, N1[1] + zero, N1[2] + p_sy)
    x_yy = (zero, zero, p_yy + zero)
    return build_sample(s, y, position, x_s, x_y, x_ss, x_sy, x_yy)


# Grid-validation limits: well before the hard guards in build_sample, since a
# track that skews this far is useless to the optimizer even if still regular.
VALIDATE_THETA_P_MAX = 0.9 * math.pi / 2
VALIDATE_CROSS_NORM_MIN = 1e-6


def _validate_track_surface(surface: SurfaceDefinition, n_s: int = 160, n_y: int = 9):
    """Reject tracks whose sampled grid degenerates or skews excessively."""
    ss = np.linspace(0.0, surface.s_length, n_s, endpoint=False)
    for s in ss:
        lo, hi = surface.y_bounds(s)
        for y in np.linspace(lo, hi, n_y):
            try:
                smp = surface.evaluator(float(s), float(y))
            except RegularityError as exc:
                raise TrackValidationError(
                    f"irregular surface at (s={s:.2f}, y={y:.2f}): {exc}"
                ) from exc
            tp = abs(float(ad.value_of(smp.theta_p)))
            cn = float(ad.value_of(ad.norm3(ad.cross3(smp.x_s, smp.x_y))))
            if tp > VALIDATE_THETA_P_MAX or cn < VALIDATE_CROSS_NORM_MIN:
                raise TrackValidationError(
                    f"irregular surface at (s={s:.2f}, y={y:.2f}): "
                    f"|theta_p| = {tp:.3f}, |x_s x x_y| = {cn:.2e}"
                )
