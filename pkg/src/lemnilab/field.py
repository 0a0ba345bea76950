"""Stable evaluation of f = |p|^2 - |q|^2 and its chart derivatives on S^2.

Values are computed projectively: a sphere point is lifted to a unit-norm
homogeneous representative (z_h, w_h) and the homogenized polynomials are
evaluated there, so f is finite everywhere (including infinity) and its
magnitude stays of order the coefficient magnitudes for degrees in the
hundreds.  First and second derivatives are taken in an affine chart, with
the chart switched at |z| = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import KostlanPolynomial, RationalPair, RealKostlanPolynomial


@dataclass(frozen=True)
class FieldJet:
    """Value, chart gradient and second x-derivative of f at a point."""

    value: float
    grad: np.ndarray  # (df/dx, df/dy) in the chart
    hess_xx: float
    chart: str  # "z" or "w"


def homogeneous_coords(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit-norm homogeneous coordinates [z_h : w_h] of sphere points.

    Uses (x + iy, 1 - t) on the southern half and the equivalent
    (1 + t, x - iy) on the northern half, each normalized; the two differ
    by a unit phase, which |f| does not see.
    """
    points = np.asarray(points, dtype=float)
    x, y, t = points[..., 0], points[..., 1], points[..., 2]
    south = t <= 0.0
    zh = np.where(south, x + 1j * y, 1.0 + t + 0j)
    wh = np.where(south, 1.0 - t + 0j, x - 1j * y)
    norm = np.sqrt(np.abs(zh) ** 2 + np.abs(wh) ** 2)
    return zh / norm, wh / norm


def horner(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Evaluate sum c_k z^k by Horner's rule (vectorized in z)."""
    acc = np.zeros_like(z, dtype=complex)
    for c in coeffs[::-1]:
        acc = acc * z + c
    return acc


def horner_jet(coeffs: np.ndarray, z: np.ndarray, order: int = 2):
    """p(z) and its first `order` derivatives in one Horner pass."""
    p0 = np.zeros_like(z, dtype=complex)
    p1 = np.zeros_like(z, dtype=complex)
    p2 = np.zeros_like(z, dtype=complex)
    for c in coeffs[::-1]:
        if order >= 2:
            p2 = p2 * z + p1
        if order >= 1:
            p1 = p1 * z + p0
        p0 = p0 * z + c
    out = [p0]
    if order >= 1:
        out.append(p1)
    if order >= 2:
        out.append(2.0 * p2)
    return out


def eval_polynomial_and_derivs(poly: KostlanPolynomial, z, order: int = 2):
    """p(z), p'(z), p''(z) up to the requested order."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    vals = horner_jet(poly.coeffs, np.asarray(z, dtype=complex), order)
    return [complex(v) for v in vals] if np.isscalar(z) else vals


_CHUNK = 8192


def _power_matrix(z: np.ndarray, n: int) -> np.ndarray:
    """(m, n+1) matrix of z^k; z should stay in the closed unit disk.

    Built by doubling (z^(w+k) = z^w z^k), which vectorizes much better
    than a sequential cumulative product along the degree axis.
    """
    V = np.empty((len(z), n + 1), dtype=complex)
    V[:, 0] = 1.0
    if n >= 1:
        V[:, 1] = z
    w = 1
    while w < n:
        m = min(w, n - w)
        np.multiply(V[:, 1 : m + 1], V[:, w, None], out=V[:, w + 1 : w + m + 1])
        w += m
    return V


def poly_jets_many(coeff_rows, z: np.ndarray, order: int = 0):
    """Values and derivatives of several equal-degree polynomials at z.

    Returns a list (one entry per coefficient row) of lists
    [p, p', ..., p^(order)].  Work is done in chunks through one shared
    power matrix and BLAS products, which beats coefficient-at-a-time
    Horner by a wide margin for degrees in the hundreds.
    """
    z = np.asarray(z, dtype=complex).ravel()
    n = len(coeff_rows[0]) - 1
    out = [
        [np.zeros(len(z), dtype=complex) for _ in range(order + 1)]
        for _ in coeff_rows
    ]
    k = np.arange(1.0, n + 1.0)
    for lo in range(0, len(z), _CHUNK):
        sl = slice(lo, min(lo + _CHUNK, len(z)))
        V = _power_matrix(z[sl], n)
        for i, c in enumerate(coeff_rows):
            out[i][0][sl] = V @ c
            if order >= 1 and n >= 1:
                out[i][1][sl] = V[:, :n] @ (c[1:] * k)
            if order >= 2 and n >= 2:
                out[i][2][sl] = V[:, : n - 1] @ (c[2:] * k[1:] * k[:-1])
    return out


def homogeneous_poly_values(coeffs: np.ndarray, zh: np.ndarray, wh: np.ndarray) -> np.ndarray:
    """sum a_k z_h^k w_h^(n-k) for unit-norm (z_h, w_h).

    Factorizes through the chart with the larger modulus so the Horner
    argument stays inside the unit disk; the extracted power is applied
    through a complex log, which stays in range for degrees up to ~1000.
    """
    zh = np.asarray(zh, dtype=complex)
    wh = np.asarray(wh, dtype=complex)
    n = len(coeffs) - 1
    out = np.empty_like(zh)
    south = np.abs(zh) <= np.abs(wh)
    if np.any(south):
        z = zh[south] / wh[south]
        out[south] = np.exp(n * np.log(wh[south])) * poly_jets_many([coeffs], z)[0][0]
    north = ~south
    if np.any(north):
        z = wh[north] / zh[north]
        out[north] = np.exp(n * np.log(zh[north])) * poly_jets_many([coeffs[::-1]], z)[0][0]
    return out


def eval_f_many(rp: RationalPair, points: np.ndarray, with_scale: bool = False):
    """f = |hp|^2 - |hq|^2 at unit-norm homogeneous representatives.

    With with_scale=True also returns |hp|^2 + |hq|^2, the natural local
    magnitude against which |f| residuals should be measured.
    """
    zh, wh = homogeneous_coords(points)
    n = rp.degree
    zh = np.atleast_1d(zh)
    wh = np.atleast_1d(wh)
    south = np.abs(zh) <= np.abs(wh)
    ap = np.empty(zh.shape)
    aq = np.empty(zh.shape)
    for mask, pc, qc, num, den in (
        (south, rp.p.coeffs, rp.q.coeffs, zh, wh),
        (~south, rp.p.coeffs[::-1], rp.q.coeffs[::-1], wh, zh),
    ):
        if not np.any(mask):
            continue
        z = num[mask] / den[mask]
        (pv,), (qv,) = poly_jets_many([pc, qc], z)
        # |den|^(2n) factor from homogenization; |den| >= 1/sqrt(2)
        amp = np.exp(2.0 * n * np.log(np.abs(den[mask])))
        ap[mask] = amp * (pv.real**2 + pv.imag**2)
        aq[mask] = amp * (qv.real**2 + qv.imag**2)
    if with_scale:
        return ap - aq, ap + aq
    return ap - aq


def eval_f(rp: RationalPair, point) -> float:
    return float(eval_f_many(rp, np.asarray(point, dtype=float)[None, :])[0])


def _pair_chart_jet(p_coeffs, q_coeffs, z, order: int = 2):
    """(f, fx, fy, fxx, scale) of f = |p|^2 - |q|^2 at affine points z.

    With order=1 the fxx slot is None (skips the second-derivative BLAS
    pass, the hot path in Newton correction).
    """
    pj, qj = poly_jets_many([p_coeffs, q_coeffs], z, order=order)
    p0, p1 = pj[0], pj[1]
    q0, q1 = qj[0], qj[1]
    a = p1 * np.conj(p0) - q1 * np.conj(q0)
    f = np.abs(p0) ** 2 - np.abs(q0) ** 2
    fx = 2.0 * a.real
    fy = -2.0 * a.imag
    fxx = None
    if order >= 2:
        fxx = 2.0 * (pj[2] * np.conj(p0) - qj[2] * np.conj(q0)).real + 2.0 * (
            np.abs(p1) ** 2 - np.abs(q1) ** 2
        )
    scale = np.abs(p0) ** 2 + np.abs(q0) ** 2
    return f, fx, fy, fxx, scale


def eval_jet(rp: RationalPair, z: complex) -> FieldJet:
    """Chart jet of f at a point of the closed unit disk (z-chart)."""
    z = complex(z)
    if abs(z) > 1.0 + 1e-12:
        raise ValueError("eval_jet requires |z| <= 1; use the w-chart outside")
    f, fx, fy, fxx, _ = _pair_chart_jet(rp.p.coeffs, rp.q.coeffs, np.array([z]))
    return FieldJet(float(f[0]), np.array([fx[0], fy[0]]), float(fxx[0]), "z")


def _chart_coords(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-point chart coordinate with modulus <= 1.

    Southern points use z = (x + iy)/(1 - t), northern ones the reciprocal
    chart u = (x - iy)/(1 + t) = 1/z.  Returns (coords, north_mask).
    """
    x, y, t = points[..., 0], points[..., 1], points[..., 2]
    north = t > 0.0
    coord = np.where(north, (x - 1j * y) / (1.0 + np.abs(t)), (x + 1j * y) / (1.0 + np.abs(t)))
    return coord, north


def _lift_chart(coord: np.ndarray, north: np.ndarray) -> np.ndarray:
    """Inverse of _chart_coords."""
    m2 = coord.real**2 + coord.imag**2
    sgn = np.where(north, -1.0, 1.0)
    return np.stack(
        [2.0 * coord.real, sgn * 2.0 * coord.imag, -sgn * (1.0 - m2)], axis=-1
    ) / (1.0 + m2)[..., None]


def chart_jets(rp: RationalPair, points: np.ndarray):
    """(f, fx, fy, scale) of f in the per-point chart of _chart_coords.

    In the northern chart the values are those of the reversed-coefficient
    pair, which rescales f by |u|^(2n) > 0: same zero set, same sign.
    """
    coord, north = _chart_coords(np.asarray(points, dtype=float))
    f = np.empty(coord.shape)
    gx = np.empty(coord.shape)
    gy = np.empty(coord.shape)
    sc = np.empty(coord.shape)
    south = ~north
    if np.any(south):
        f0, fx, fy, _, s = _pair_chart_jet(rp.p.coeffs, rp.q.coeffs, coord[south], order=1)
        f[south], gx[south], gy[south], sc[south] = f0, fx, fy, s
    if np.any(north):
        f0, fx, fy, _, s = _pair_chart_jet(
            rp.p.coeffs[::-1], rp.q.coeffs[::-1], coord[north], order=1
        )
        f[north], gx[north], gy[north], sc[north] = f0, fx, fy, s
    return f, gx, gy, sc, coord, north


def _power_table(x: np.ndarray, n: int) -> np.ndarray:
    """(n+1, m) table of x^k, k = 0..n."""
    out = np.ones((n + 1, len(x)))
    if n >= 1:
        out[1] = x
        for k in range(2, n + 1):
            out[k] = out[k - 1] * x
    return out


def eval_real_many(
    poly: RealKostlanPolynomial,
    points: np.ndarray,
    with_grad: bool = False,
    chunk: int = 4096,
):
    """Homogeneous real polynomial (and ambient gradient) at sphere points.

    Chunked so the (n_monomials, chunk) intermediates stay modest even at
    degree a few hundred.
    """
    pts = np.asarray(points, dtype=float)
    n = poly.degree
    A, B, C = poly.exps[:, 0], poly.exps[:, 1], poly.exps[:, 2]
    c = poly.coeffs
    N = len(pts)
    vals = np.empty(N)
    scale = np.empty(N)
    grad = np.empty((N, 3)) if with_grad else None
    Am = np.where(A > 0, A - 1, 0)
    Bm = np.where(B > 0, B - 1, 0)
    Cm = np.where(C > 0, C - 1, 0)
    for lo in range(0, N, chunk):
        sl = slice(lo, min(lo + chunk, N))
        px = _power_table(pts[sl, 0], n)
        py = _power_table(pts[sl, 1], n)
        pz = _power_table(pts[sl, 2], n)
        monos = px[A] * py[B] * pz[C]
        terms = c[:, None] * monos
        vals[sl] = terms.sum(axis=0)
        scale[sl] = np.sqrt((terms * terms).sum(axis=0))
        if with_grad:
            grad[sl, 0] = (c * A) @ (px[Am] * py[B] * pz[C])
            grad[sl, 1] = (c * B) @ (px[A] * py[Bm] * pz[C])
            grad[sl, 2] = (c * C) @ (px[A] * py[B] * pz[Cm])
    if with_grad:
        return vals, grad, scale
    return vals, scale


def real_newton_correct(
    poly: RealKostlanPolynomial,
    points: np.ndarray,
    tol_rel: float = 1e-11,
    max_iters: int = 12,
):
    """Project sphere points onto {poly = 0} by tangential Newton steps.

    Same return convention as :func:`newton_correct`; the gradient is the
    ambient gradient projected to the tangent plane, and residuals are
    measured against the root-sum-square of the monomial terms.
    """
    pts = np.array(points, dtype=float)
    rel = np.full(len(pts), np.inf)
    relgrad = np.full(len(pts), np.inf)
    active = np.arange(len(pts))
    for _ in range(max_iters):
        v = pts[active]
        f, g, sc = eval_real_many(poly, v, with_grad=True)
        sc = np.maximum(sc, 1e-300)
        gt = g - np.einsum("ij,ij->i", g, v)[:, None] * v
        g2 = np.einsum("ij,ij->i", gt, gt)
        r = np.abs(f) / sc
        rel[active] = r
        relgrad[active] = np.sqrt(g2) / sc
        pending = r > tol_rel
        if not np.any(pending):
            break
        ok = g2 > 0
        step = np.where(ok, f / np.where(ok, g2, 1.0), 0.0)
        moved = v - step[:, None] * gt
        moved /= np.linalg.norm(moved, axis=1)[:, None]
        upd = active[pending]
        pts[upd] = moved[pending]
        active = upd
    return pts, rel, relgrad, rel <= tol_rel


def curve_tangents(rp: RationalPair, points: np.ndarray) -> np.ndarray:
    """Unit 3-vectors tangent to {f = 0} at points assumed on the curve.

    The chart gradient is pushed forward to R^3 through the chart lift and
    rotated by 90 degrees in the tangent plane; the overall sign is
    arbitrary.
    """
    f, gx, gy, sc, coord, north = chart_jets(rp, points)
    h = 1e-7
    e1 = (_lift_chart(coord + h, north) - _lift_chart(coord - h, north)) / (2 * h)
    e2 = (_lift_chart(coord + 1j * h, north) - _lift_chart(coord - 1j * h, north)) / (2 * h)
    g3 = gx[:, None] * e1 + gy[:, None] * e2
    t = np.cross(np.asarray(points, dtype=float), g3)
    nrm = np.linalg.norm(t, axis=1)
    return t / np.where(nrm > 0, nrm, 1.0)[:, None]


def real_curve_tangents(poly: RealKostlanPolynomial, points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    _, g, _ = eval_real_many(poly, pts, with_grad=True)
    t = np.cross(pts, g)
    nrm = np.linalg.norm(t, axis=1)
    return t / np.where(nrm > 0, nrm, 1.0)[:, None]


def newton_correct(
    rp: RationalPair,
    points: np.ndarray,
    tol_rel: float = 1e-11,
    max_iters: int = 12,
):
    """Project sphere points onto {f = 0} by chart Newton steps.

    Returns (corrected points, relative residual, relative gradient norm,
    converged mask).  Residuals and gradients are measured against the
    local field scale |p|^2 + |q|^2.
    """
    pts = np.array(points, dtype=float)
    rel = np.full(len(pts), np.inf)
    relgrad = np.full(len(pts), np.inf)
    active = np.arange(len(pts))
    for _ in range(max_iters):
        f, gx, gy, sc, coord, north = chart_jets(rp, pts[active])
        g2 = gx * gx + gy * gy
        r = np.abs(f) / sc
        rel[active] = r
        relgrad[active] = np.sqrt(g2) / sc
        pending = r > tol_rel
        if not np.any(pending):
            break
        ok = g2 > 0
        step = np.where(ok, f / np.where(ok, g2, 1.0), 0.0)
        znew = coord - step * (gx + 1j * gy)
        moved = _lift_chart(znew, north)
        upd = active[pending]
        pts[upd] = moved[pending]
        active = upd
    return pts, rel, relgrad, rel <= tol_rel
