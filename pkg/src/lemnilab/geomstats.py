"""Geometric observables of a traced lemniscate.

Spherical length (direct and by integral geometry), meridian-tangent
counts and axis-looping components.  Tangent counting works on the
densified polyline: sign changes of the longitude increment are located
coarsely, then the two adjacent segments are re-sampled at 10x density so
a discretization wiggle cannot fake or hide a tangency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensemble import RationalPair
from .field import eval_f_many
from .sphere import GreatCircle, orthonormal_frame, unit_vector
from .tracer import TracedLemniscate, default_options


class AxisTooClose(ValueError):
    """A traced vertex lies too near the axis for longitude statistics."""


class TangencySuspected(RuntimeError):
    """A great-circle crossing looks non-transversal; trial is flagged."""


@dataclass(frozen=True)
class LengthEstimate:
    value: float
    method: str  # "direct-polyline" or "integral-geometry"
    stderr: float | None = None


@dataclass(frozen=True)
class TangentCount:
    count: int
    axis: np.ndarray


def polyline_length(t: TracedLemniscate) -> LengthEstimate:
    return LengthEstimate(t.total_length, "direct-polyline")


def _longitudes(vertices: np.ndarray, e1: np.ndarray, e2: np.ndarray) -> np.ndarray:
    return np.arctan2(vertices @ e2, vertices @ e1)


def _wrapped_increments(theta: np.ndarray) -> np.ndarray:
    """theta[i+1] - theta[i] wrapped to (-pi, pi], for the open vertex list."""
    d = np.diff(theta)
    return (d + math.pi) % (2.0 * math.pi) - math.pi


_POLE_FLOOR = 1e-5


def _pole_distance(P: np.ndarray, axis: np.ndarray) -> np.ndarray:
    """Spherical distance to the nearer of axis / antipode."""
    return np.arccos(np.clip(np.abs(P @ axis), -1.0, 1.0))


def _refine_near_axis(P: np.ndarray, axis: np.ndarray, field) -> np.ndarray:
    """Subdivide a closed vertex loop so each arc-step stays below a fifth
    of its distance to the axis poles.

    Longitude about the axis varies by at most ~step/dist per segment, so
    this keeps the per-segment longitude change small even where the curve
    dives toward a pole.  Raises AxisTooClose if the curve comes within
    _POLE_FLOOR of a pole.
    """
    for _ in range(40):
        d = _pole_distance(P, axis)
        if d.min() < _POLE_FLOOR:
            raise AxisTooClose("curve passes through the axis neighborhood")
        dn = np.minimum(d, np.roll(d, -1))
        step = np.arccos(
            np.clip(np.einsum("ij,ij->i", P, np.roll(P, -1, axis=0)), -1.0, 1.0)
        )
        bad = step > 0.2 * dn
        if not bad.any():
            return P
        if field is None:
            raise AxisTooClose(
                "curve too close to the axis for the traced arc-step"
            )
        mids = P[bad] + np.roll(P, -1, axis=0)[bad]
        mids /= np.linalg.norm(mids, axis=1)[:, None]
        corrected, rel, relgrad, conv = field.newton(mids, 1e-9, 12)
        if not conv.all():
            raise AxisTooClose("refinement near the axis failed to converge")
        P = np.insert(P, np.flatnonzero(bad) + 1, corrected, axis=0)
    raise AxisTooClose("axis refinement did not settle")


def _cyclic_sign_changes(d: np.ndarray) -> np.ndarray:
    s = np.where(d >= 0.0, 1, -1)
    return np.flatnonzero(s != np.roll(s, -1))  # change between seg i and i+1


def _insert_refined(P, segs, corrected, refine):
    pieces = []
    segset = {int(s): i for i, s in enumerate(segs)}
    for i in range(len(P)):
        pieces.append(P[i][None, :])
        if i in segset:
            pieces.append(corrected[segset[i]])
    return np.concatenate(pieces)


def _component_tangents(P, axis, e1, e2, field, refine) -> tuple[int, int]:
    """(sign-change count, winding) of the longitude along one closed loop."""
    theta = _longitudes(P, e1, e2)
    d = _wrapped_increments(np.append(theta, theta[0]))
    winding = round(float(d.sum()) / (2.0 * math.pi))
    changes = _cyclic_sign_changes(d)
    if field is None or len(changes) == 0:
        return len(changes), winding
    # refine every segment adjacent to a sign change, then recount globally
    k = len(P)
    segs = np.unique(np.concatenate([changes, (changes + 1) % k]))
    a = P[segs]
    b = P[(segs + 1) % k]
    ts = np.arange(1, refine) / refine
    mids = a[:, None, :] * (1.0 - ts)[None, :, None] + b[:, None, :] * ts[None, :, None]
    mids = mids.reshape(-1, 3)
    mids /= np.linalg.norm(mids, axis=1)[:, None]
    corrected, rel, relgrad, conv = field.newton(mids, 1e-9, 12)
    if not conv.all():
        # fall back to the coarse count rather than reject the trial
        return len(changes), winding
    corrected = corrected.reshape(len(segs), refine - 1, 3)
    Q = _insert_refined(P, segs, corrected, refine)
    theta = _longitudes(Q, e1, e2)
    d = _wrapped_increments(np.append(theta, theta[0]))
    return len(_cyclic_sign_changes(d)), winding


def meridian_stats(t: TracedLemniscate, axis, field=None, refine: int = 10):
    """(tangent count, looping components, windings) about one axis.

    Components are first subdivided near the axis so longitude increments
    are trustworthy, then tangents are counted as strict sign changes of
    the increment with local 10x refinement around each change.
    """
    axis = unit_vector(axis)
    e1, e2 = orthonormal_frame(axis)
    total = 0
    windings = []
    for c in t.components:
        P = _refine_near_axis(c.vertices[:-1], axis, field)
        cnt, w = _component_tangents(P, axis, e1, e2, field, refine)
        total += cnt
        windings.append(w)
    return total, int(np.count_nonzero(windings)), np.array(windings, dtype=np.int64)


def count_meridian_tangents(
    t: TracedLemniscate, axis, field=None, refine: int = 10
) -> TangentCount:
    """Number of critical points of the longitude about axis along Gamma."""
    nu, _, _ = meridian_stats(t, axis, field, refine)
    return TangentCount(nu, unit_vector(axis))


def components_looping_axis(t: TracedLemniscate, axis, field=None) -> int:
    """Components whose longitude about axis has nonzero total winding."""
    _, loops, _ = meridian_stats(t, axis, field)
    return loops


def component_windings(t: TracedLemniscate, axis, field=None) -> np.ndarray:
    _, _, w = meridian_stats(t, axis, field)
    return w


def great_circle_intersections(
    rp: RationalPair,
    g: GreatCircle,
    samples: int | None = None,
    tangency_tol: float = 1e-7,
) -> int:
    """Transversal crossings of Gamma with the great circle g.

    Sign changes of f along a dense sampling of g, each refined by
    bisection in the circle parameter.  Raises TangencySuspected when the
    circle lies on the curve or a crossing has a vanishing derivative of f
    along the circle.
    """
    n = rp.degree
    if samples is None:
        # match the tracer's default cell size along the circle
        samples = max(512, 8 * default_options(n).grid_resolution)
    tgrid = np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False)
    pts = g.point(tgrid)
    f, sc = eval_f_many(rp, pts, with_scale=True)
    if np.max(np.abs(f) / sc) < tangency_tol:
        raise TangencySuspected("f vanishes along the whole circle")
    s = f > 0
    change = np.flatnonzero(s != np.roll(s, -1))
    if len(change) == 0:
        return 0
    lo = tgrid[change]
    hi = lo + 2.0 * math.pi / samples
    flo = f[change]
    for _ in range(45):
        tm = 0.5 * (lo + hi)
        fm = eval_f_many(rp, g.point(tm))
        up = (fm > 0) == (flo > 0)
        lo = np.where(up, tm, lo)
        hi = np.where(up, hi, tm)
    troot = 0.5 * (lo + hi)
    h = 1e-6
    fp, scp = eval_f_many(rp, g.point(troot + h), with_scale=True)
    fm2, _ = eval_f_many(rp, g.point(troot - h), with_scale=True)
    deriv = np.abs(fp - fm2) / (2.0 * h * scp)
    if np.any(deriv < tangency_tol):
        raise TangencySuspected("near-tangential crossing")
    return len(change)


def integral_geometry_length(rp_samples, circles) -> LengthEstimate:
    """pi times the mean crossing count over paired (pair, circle) draws."""
    counts = []
    for rp, g in zip(rp_samples, circles):
        counts.append(great_circle_intersections(rp, g))
    counts = np.array(counts, dtype=float)
    mean = math.pi * counts.mean()
    stderr = math.pi * counts.std(ddof=1) / math.sqrt(len(counts))
    return LengthEstimate(mean, "integral-geometry", stderr)
