"""Constructive realization of circle arrangements as rational lemniscates.

Any rooted tree of m circles is realized by a degree-m pair: each circle
is added by perturbing r = p/q with a simple pole eps/z at a point rotated
to the chart origin, which spawns one oval around the pole without
disturbing the rest of the arrangement.  Rational lemniscates are closed
under pullback by arbitrary Mobius maps, so before every step the frame is
renormalized (rotate the target point to the origin, dilate the free disk
to unit size); this keeps each new oval at O(1) scale and the ratio
between nesting levels shallow.  eps is found by halving from near its
theoretical ceiling delta*(1-c0) until three scale-free checks pass: the
oval exists as a single radial crossing inside the pole disk, every old
oval persists under Newton continuation (with at most n+1 ovals possible
in degree n+1, nothing else can appear), and the derivative certificate
eps/|z|^2 - |r'(z)| is positive on the new oval.  One global trace at the
end, in a frame anchored at the deepest node with the root face unfolded
to infinity, confirms the whole tree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensemble import KostlanPolynomial, RationalPair, rotate_pair
from .field import chart_jets, newton_correct
from .sphere import (
    INF,
    Rotation,
    apply_mobius,
    inverse_stereographic,
    inverse_stereographic_many,
)
from .tracer import DegenerateLemniscate, TraceOptions, trace
from .topology import (
    Arrangement,
    InconsistentTopology,
    PointOnCurve,
    _parse,
    nesting_tree,
    rooted_canonical_form,
)


class InvalidSpec(ValueError):
    pass


class EpsilonExhausted(RuntimeError):
    """No epsilon small enough was found for one inductive step."""


_ORIGIN = np.array([0.0, 0.0, -1.0])  # chart coordinate z = 0
_MAX_CIRCLES = 12
_MAX_RESOLUTION = 768


@dataclass(frozen=True)
class ConstructedLemniscate:
    pair: RationalPair
    spec: Arrangement
    epsilons: tuple
    certificates: tuple  # min eps/|z|^2 - |r'| over the new oval, per step
    root_point: np.ndarray  # a point of the outer face
    trace_resolution: int  # grid frequency at which the tree was verified

    @property
    def degree(self) -> int:
        return self.pair.degree

    def to_json(self) -> dict:
        return {
            "spec": self.spec.canonical,
            "pair": self.pair.to_json(),
            "epsilons": list(self.epsilons),
            "certificates": list(self.certificates),
            "root_point": self.root_point.tolist(),
            "trace_resolution": self.trace_resolution,
        }


def _poly_eval(coeffs: np.ndarray, z) -> np.ndarray:
    return np.polyval(np.asarray(coeffs)[::-1], z)


def _r_prime(p: np.ndarray, q: np.ndarray, z: np.ndarray) -> np.ndarray:
    k = np.arange(1, len(p))
    dp = p[1:] * k if len(p) > 1 else np.zeros(1, dtype=complex)
    dq = q[1:] * k if len(q) > 1 else np.zeros(1, dtype=complex)
    qv = _poly_eval(q, z)
    return (_poly_eval(dp, z) * qv - _poly_eval(p, z) * _poly_eval(dq, z)) / qv**2


def _chart(verts: np.ndarray) -> np.ndarray:
    t = np.minimum(verts[:, 2], 1.0 - 1e-12)
    return (verts[:, 0] + 1j * verts[:, 1]) / (1.0 - t)


def _mobius_poly(coeffs: np.ndarray, a, b, c, d) -> np.ndarray:
    """Coefficients of sum_k coeffs[k] (a z + b)^k (c z + d)^(n-k)."""
    n = len(coeffs) - 1
    top = [np.array([1.0 + 0j])]
    bot = [np.array([1.0 + 0j])]
    for _ in range(n):
        top.append(np.convolve(top[-1], np.array([b, a], dtype=complex)))
        bot.append(np.convolve(bot[-1], np.array([d, c], dtype=complex)))
    out = np.zeros(n + 1, dtype=complex)
    for k in range(n + 1):
        term = coeffs[k] * np.convolve(top[k], bot[n - k])
        out[: len(term)] += term
    return out


class _Frame:
    """The pair plus everything that must ride along under Mobius moves."""

    def __init__(self):
        self.rp = None
        self.markers = {"root": INF}
        self.comp_verts = []  # per-component vertex arrays of the last trace

    def rotate(self, rot: Rotation):
        if self.rp is not None:
            self.rp = rotate_pair(self.rp, rot)
        self.markers = {k: apply_mobius(rot, m) for k, m in self.markers.items()}
        self.comp_verts = [rot.apply(v) for v in self.comp_verts]

    def dilate(self, lam: float):
        """Change coordinate to z' = z / lam."""
        if self.rp is not None:
            n = self.rp.degree
            pows = lam ** np.arange(n + 1)
            pc = self.rp.p.coeffs * pows
            qc = self.rp.q.coeffs * pows
            s = max(np.abs(pc).max(), np.abs(qc).max())
            self.rp = RationalPair(
                KostlanPolynomial(n, pc / s), KostlanPolynomial(n, qc / s)
            )
        self.markers = {
            k: (m if m is INF else m / lam) for k, m in self.markers.items()
        }
        self.comp_verts = [
            inverse_stereographic_many(_chart(v) / lam) for v in self.comp_verts
        ]

    def unfold(self, m_root):
        """Pull back by z = m w / (w + 1): the root marker goes to infinity.

        With the root face wrapped around the point at infinity, a nest of
        circles turns into rings at hierarchical chart radii, which a
        single dilation can then balance.
        """
        if m_root is INF:
            return
        m = complex(m_root)
        if self.rp is not None:
            n = self.rp.degree
            pc = _mobius_poly(self.rp.p.coeffs, m, 0.0, 1.0, 1.0)
            qc = _mobius_poly(self.rp.q.coeffs, m, 0.0, 1.0, 1.0)
            s = max(np.abs(pc).max(), np.abs(qc).max())
            self.rp = RationalPair(
                KostlanPolynomial(n, pc / s), KostlanPolynomial(n, qc / s)
            )

        def inv(z):
            if z is INF:
                return -1.0 + 0j
            den = m - z
            if den == 0:
                return INF
            return z / den

        self.markers = {k: inv(v) for k, v in self.markers.items()}
        nv = []
        for v in self.comp_verts:
            z = _chart(v)
            den = m - z
            small = np.abs(den) < 1e-300
            den = np.where(small, 1e-300, den)
            nv.append(inverse_stereographic_many(z / den))
        self.comp_verts = nv

    def root_point3(self) -> np.ndarray:
        return inverse_stereographic(self.markers["root"])

    def curve_chart_abs(self) -> np.ndarray:
        if not self.comp_verts:
            return np.array([])
        return np.abs(_chart(np.concatenate(self.comp_verts)))

    def min_feature(self) -> float:
        """Smallest component diameter (3D chord) in the current frame."""
        best = math.inf
        for v in self.comp_verts:
            c = v.mean(axis=0)
            best = min(best, 2.0 * float(np.linalg.norm(v - c, axis=1).max()))
        return best


def _resolution_for(feature: float) -> int:
    # icosphere edge is about 1.1/nu; want a few cells across the feature
    if not math.isfinite(feature) or feature <= 0:
        return 96
    return int(np.clip(math.ceil(4.5 / feature), 96, _MAX_RESOLUTION))


def _verify(frame: _Frame, rp: RationalPair, expected: str, nu: int):
    t = trace(rp, TraceOptions(grid_resolution=nu))
    tree = nesting_tree(rp, t)
    form = rooted_canonical_form(tree, frame.root_point3())
    return t, form.canonical == expected


def _add_circle(frame: _Frame, key, shrink: float = 1.0):
    """One inductive step; mutates frame, returns (eps, certificate)."""
    # normalize: parent face marker to the origin, free disk to unit size
    parent_marker = frame.markers[key[0]] if key[0] in frame.markers else INF
    frame.rotate(Rotation.align(inverse_stereographic(parent_marker), _ORIGIN))
    if frame.comp_verts:
        frame.dilate(float(frame.curve_chart_abs().min()))
    # pole goes next to the parent marker, not on top of it
    frame.rotate(Rotation.align(inverse_stereographic(0.45 + 0.0j), _ORIGIN))

    dists = [1.0]
    if frame.comp_verts:
        dists.append(float(frame.curve_chart_abs().min()))
    dists.extend(
        abs(m) for m in frame.markers.values() if m is not INF and abs(m) > 0
    )
    delta = 0.5 * min(dists)

    if frame.rp is None:
        p = np.array([0.5 + 0j])  # empty lemniscate |r| = 1/2
        q = np.array([1.0 + 0j])
    else:
        p, q = frame.rp.p.coeffs, frame.rp.q.coeffs
        if abs(_poly_eval(p, 0.0)) >= abs(_poly_eval(q, 0.0)):
            p, q = q, p  # ensure |r(0)| < 1

    # c0 = max |r| over the pole disk; no curve there, so c0 < 1
    rr = delta * np.sqrt(np.linspace(0.02, 1.0, 16))
    th = np.exp(2j * np.pi * np.linspace(0.0, 1.0, 32, endpoint=False))
    zs = np.concatenate([[0.0 + 0j], np.outer(rr, th).ravel()])
    c0 = float(np.abs(_poly_eval(p, zs) / _poly_eval(q, zs)).max())
    if c0 >= 1.0:
        raise EpsilonExhausted("pole disk touches the current lemniscate")

    n = len(p) - 1
    eps = 0.9 * shrink * delta * (1.0 - c0)
    for _ in range(60):
        pc = np.zeros(n + 2, dtype=complex)
        pc[1:] = p
        pc[: n + 1] += eps * q
        qc = np.zeros(n + 2, dtype=complex)
        qc[1:] = q
        s = max(np.abs(pc).max(), np.abs(qc).max())
        cand = RationalPair(
            KostlanPolynomial(n + 1, pc / s), KostlanPolynomial(n + 1, qc / s)
        )
        # local checks only; they are scale free, so deep nests cost the
        # same as shallow ones.  Correctness of the global picture follows
        # from the count bound: degree-(n+1) lemniscates have at most n+1
        # ovals, and we exhibit n persisting ones plus the new one.
        oval_z = _local_oval(pc, qc, eps, delta)
        if oval_z is None:
            eps *= 0.5
            continue
        moved = _persisted_components(cand, frame.comp_verts)
        if moved is None:
            eps *= 0.5
            continue
        margin = eps / np.abs(oval_z) ** 2 - np.abs(_r_prime(p, q, oval_z))
        cert = float(margin.min())
        if cert > 0.0:
            frame.rp = cand
            frame.comp_verts = moved + [inverse_stereographic_many(oval_z)]
            frame.markers[key] = 0.0 + 0.0j
            return eps, cert
        eps *= 0.5
    raise EpsilonExhausted("no epsilon passed after 60 halvings")


def _local_oval(pc, qc, eps, delta, n_rays=64):
    """The new oval, found by radial bisection inside the pole disk.

    Requires f > 0 throughout the inner ring, f < 0 at radius delta, and
    exactly one sign change along every ray; returns None otherwise.
    """
    ang = np.exp(2j * np.pi * np.arange(n_rays) / n_rays)
    rad = np.geomspace(eps / 8.0, delta, 96)
    F = _cand_field(pc, qc, rad[None, :] * ang[:, None])
    s = F > 0
    if not np.all(s[:, 0]) or np.any(s[:, -1]):
        return None
    flips = np.count_nonzero(s[:, 1:] != s[:, :-1], axis=1)
    if np.any(flips != 1):
        return None
    idx = np.argmax(s[:, 1:] != s[:, :-1], axis=1)
    lo, hi = rad[idx], rad[idx + 1]
    for _ in range(45):
        mid = np.sqrt(lo * hi)
        up = _cand_field(pc, qc, mid * ang) > 0
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    return 0.5 * (lo + hi) * ang


def _cand_field(pc, qc, z):
    return np.abs(_poly_eval(pc, z)) ** 2 - np.abs(_poly_eval(qc, z)) ** 2


def _persisted_components(cand: RationalPair, comp_verts: list):
    """Newton-project each old oval onto the perturbed curve.

    Returns the corrected vertex arrays, or None if any point failed to
    converge or drifted by more than a fifth of its oval's diameter
    (which would void the persistence argument).
    """
    moved = []
    for v in comp_verts:
        # 1e-7 residual at healthy gradient puts the point within ~1e-9
        # of the curve, plenty below the drift threshold
        pts, rel, relgrad, conv = newton_correct(cand, v, tol_rel=1e-8)
        if rel.max() > 1e-7 or relgrad.min() < 1e-9:
            return None
        disp = np.linalg.norm(pts - v, axis=1).max()
        diam = 2.0 * np.linalg.norm(v - v.mean(axis=0), axis=1).max()
        if disp > 0.2 * diam:
            return None
        moved.append(pts)
    return moved


def _balance_frame(frame: _Frame, spec: Arrangement, anchor_key):
    """Unfold and dilate so feature scales straddle 1, then verify.

    The frame is first centered at the deepest node, where the scales
    accumulate, so the unfolded nest spreads into hierarchical rings.
    """
    base = _Frame()
    base.rp = frame.rp
    base.markers = dict(frame.markers)
    base.comp_verts = list(frame.comp_verts)
    base.rotate(
        Rotation.align(inverse_stereographic(base.markers[anchor_key]), _ORIGIN)
    )
    base.unfold(base.markers["root"])
    radii = [np.median(np.abs(_chart(v))) for v in base.comp_verts]
    lam0 = float(np.exp(np.mean(np.log(np.maximum(radii, 1e-12)))))
    for lam in (lam0, 4.0 * lam0, lam0 / 4.0, 16.0 * lam0, lam0 / 16.0):
        probe = _Frame()
        probe.rp = base.rp
        probe.markers = dict(base.markers)
        probe.comp_verts = list(base.comp_verts)
        probe.dilate(lam)
        nu = _resolution_for(probe.min_feature())
        while True:
            try:
                t, ok = _verify(probe, probe.rp, spec.canonical, nu)
            except (DegenerateLemniscate, InconsistentTopology, PointOnCurve):
                ok = False
            if ok:
                probe.comp_verts = [c.vertices[:-1].copy() for c in t.components]
                return probe, nu
            if nu >= _MAX_RESOLUTION:
                break
            nu = min(2 * nu, _MAX_RESOLUTION)
    raise EpsilonExhausted("could not verify the finished arrangement")


def realize(spec: Arrangement) -> ConstructedLemniscate:
    """A nondegenerate rational pair whose lemniscate nests like spec."""
    try:
        root_children = _parse(spec.canonical)
    except ValueError as e:
        raise InvalidSpec(str(e))
    m = spec.n_nodes - 1
    if m > _MAX_CIRCLES:
        raise InvalidSpec("at most %d circles supported" % _MAX_CIRCLES)
    if m == 0:
        raise InvalidSpec("spec must contain at least one circle")

    # parent-first order, deepest subtree first within each node
    order = []

    def depth_of(ch):
        return 1 + max((depth_of(c) for c in ch), default=0)

    def walk(children, parent_key, d):
        ranked = sorted(
            enumerate(children), key=lambda ic: -depth_of(ic[1])
        )
        for i, ch in ranked:
            order.append(((parent_key, i), d))
            walk(ch, (parent_key, i), d + 1)

    walk(root_children, "root", 1)
    anchor_key = max(order, key=lambda kd: kd[1])[0]

    last = None
    for attempt in range(3):
        frame = _Frame()
        epsilons, certs = [], []
        try:
            for key, _depth in order:
                eps, cert = _add_circle(frame, key, shrink=0.5**attempt)
                epsilons.append(eps)
                certs.append(cert)
            frame, nu = _balance_frame(frame, spec, anchor_key)
        except EpsilonExhausted as e:
            last = e
            continue
        return ConstructedLemniscate(
            frame.rp,
            spec,
            tuple(epsilons),
            tuple(certs),
            frame.root_point3(),
            nu,
        )
    raise last


def certify_nondegenerate(c: ConstructedLemniscate, rel_threshold=1e-6) -> bool:
    """Re-trace and require a healthy chart gradient along every component."""
    try:
        t = trace(c.pair, TraceOptions(grid_resolution=c.trace_resolution))
    except DegenerateLemniscate:
        return False
    if len(t.components) != c.degree:
        return False
    for comp in t.components:
        f, gx, gy, sc, _, _ = chart_jets(c.pair, comp.vertices[:-1])
        rel = np.hypot(gx, gy) / sc
        if rel.min() < rel_threshold:
            return False
    return True


def realized_tree(c: ConstructedLemniscate) -> Arrangement:
    """Rooted canonical form of the traced realization (round-trip check)."""
    t = trace(c.pair, TraceOptions(grid_resolution=c.trace_resolution))
    tree = nesting_tree(c.pair, t)
    return rooted_canonical_form(tree, c.root_point)


def all_rooted_trees(max_nodes: int) -> list:
    """Canonical strings of all rooted trees with up to max_nodes nodes."""
    forms = {1: ["()"]}
    for n in range(2, max_nodes + 1):
        seen = set()
        # attach one new leaf at every node of every (n-1)-node tree
        for s in forms[n - 1]:
            for i, ch in enumerate(s):
                if ch == "(":
                    seen.add(Arrangement(s[: i + 1] + "()" + s[i + 1 :]).canonical)
        forms[n] = sorted(seen)
    out = []
    for n in range(1, max_nodes + 1):
        out.extend(forms[n])
    return out
