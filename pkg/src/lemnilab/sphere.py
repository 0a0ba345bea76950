"""Geometry of the unit sphere and the extended complex plane.

Points on S^2 are unit 3-vectors (numpy arrays).  The extended plane is
represented as a tagged value: a python ``complex`` for finite points and
the module-level sentinel :data:`INF` for the point at infinity.  Rotations
are stored in SU(2) form (lam, mu) and act both as Mobius maps on the plane
and as rigid rotations of the sphere; the two actions are conjugate under
stereographic projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_POLE_TOL = 1e-12


class _Infinity:
    """Point at infinity of the extended complex plane."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"


INF = _Infinity()


def unit_vector(v) -> np.ndarray:
    """Return v renormalized to a unit 3-vector."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0 or not np.isfinite(n):
        raise ValueError("cannot normalize zero or non-finite vector")
    return v / n


def stereographic(p) -> "complex | _Infinity":
    """Project a sphere point (x, y, t) to (x + iy)/(1 - t).

    The projection pole (0, 0, 1) maps to INF.
    """
    x, y, t = np.asarray(p, dtype=float)
    if abs(1.0 - t) < _POLE_TOL:
        return INF
    return complex(x, y) / (1.0 - t)


def inverse_stereographic(z) -> np.ndarray:
    """Lift a point of the extended plane back to the unit sphere."""
    if z is INF:
        return np.array([0.0, 0.0, 1.0])
    z = complex(z)
    m2 = z.real * z.real + z.imag * z.imag
    return np.array([2.0 * z.real, 2.0 * z.imag, m2 - 1.0]) / (m2 + 1.0)


def stereographic_many(points: np.ndarray) -> np.ndarray:
    """Vectorized projection of (N, 3) sphere points; poles map to inf+0j."""
    points = np.asarray(points, dtype=float)
    denom = 1.0 - points[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (points[..., 0] + 1j * points[..., 1]) / denom
    z = np.where(np.abs(denom) < _POLE_TOL, np.inf + 0j, z)
    return z


def inverse_stereographic_many(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    m2 = z.real**2 + z.imag**2
    out = np.stack([2.0 * z.real, 2.0 * z.imag, m2 - 1.0], axis=-1) / (m2 + 1.0)[..., None]
    return out


def spherical_distance(a, b) -> float:
    """Great-circle distance arccos(a . b), clamped to [0, pi]."""
    d = float(np.dot(np.asarray(a, dtype=float), np.asarray(b, dtype=float)))
    return math.acos(min(1.0, max(-1.0, d)))


def spherical_distance_many(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.einsum("...i,...i->...", np.asarray(a, float), np.asarray(b, float))
    return np.arccos(np.clip(d, -1.0, 1.0))


class PoleCoordinates(ValueError):
    """Spherical coordinates requested at a pole of the chosen axis."""


def spherical_coords(p, axis=None) -> tuple[float, float]:
    """Return (theta, phi) of p about the given axis (default z-axis).

    theta in (-pi, pi] is the longitude, phi in [0, pi] the colatitude.
    Raises PoleCoordinates when p lies at the axis or its antipode, where
    the longitude is undefined.
    """
    p = np.asarray(p, dtype=float)
    if axis is None:
        e1 = np.array([1.0, 0.0, 0.0])
        e2 = np.array([0.0, 1.0, 0.0])
        e3 = np.array([0.0, 0.0, 1.0])
    else:
        e3 = unit_vector(axis)
        e1, e2 = orthonormal_frame(e3)
    c = float(np.dot(p, e3))
    phi = math.acos(min(1.0, max(-1.0, c)))
    sx, sy = float(np.dot(p, e1)), float(np.dot(p, e2))
    if abs(sx) < _POLE_TOL and abs(sy) < _POLE_TOL:
        raise PoleCoordinates("longitude undefined at the poles of the axis")
    return math.atan2(sy, sx), phi


def orthonormal_frame(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two unit vectors completing axis to a right-handed orthonormal frame."""
    axis = unit_vector(axis)
    helper = np.array([1.0, 0.0, 0.0])
    if abs(axis[0]) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    return e1, e2


@dataclass(frozen=True)
class Rotation:
    """An SU(2) element (lam, mu; -conj(mu), conj(lam)), |lam|^2+|mu|^2 = 1.

    Acts on the extended plane as the Mobius map
    z -> (lam z + mu)/(-conj(mu) z + conj(lam)) and on the sphere as the
    corresponding rigid rotation.
    """

    lam: complex
    mu: complex
    _matrix: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        norm = abs(self.lam) ** 2 + abs(self.mu) ** 2
        if abs(norm - 1.0) > 1e-9:
            raise ValueError("not an SU(2) element: |lam|^2+|mu|^2 != 1")
        s = 1.0 / math.sqrt(norm)
        object.__setattr__(self, "lam", complex(self.lam) * s)
        object.__setattr__(self, "mu", complex(self.mu) * s)

    @staticmethod
    def identity() -> "Rotation":
        return Rotation(1.0 + 0j, 0j)

    @staticmethod
    def from_quaternion(w: float, x: float, y: float, z: float) -> "Rotation":
        n = math.sqrt(w * w + x * x + y * y + z * z)
        w, x, y, z = w / n, x / n, y / n, z / n
        return Rotation(complex(w, z), complex(-y, x))

    @staticmethod
    def from_axis_angle(axis, angle: float) -> "Rotation":
        axis = unit_vector(axis)
        h = 0.5 * angle
        s = math.sin(h)
        return Rotation.from_quaternion(math.cos(h), s * axis[0], s * axis[1], s * axis[2])

    @staticmethod
    def align(src, dst) -> "Rotation":
        """Rotation taking the sphere point src to dst (shortest arc)."""
        src = unit_vector(src)
        dst = unit_vector(dst)
        c = float(np.dot(src, dst))
        if c > 1.0 - 1e-14:
            return Rotation.identity()
        if c < -1.0 + 1e-14:
            e1, _ = orthonormal_frame(src)
            return Rotation.from_axis_angle(e1, math.pi)
        axis = np.cross(src, dst)
        return Rotation.from_axis_angle(axis, math.acos(max(-1.0, min(1.0, c))))

    @staticmethod
    def random(rng: np.random.Generator) -> "Rotation":
        """Haar-uniform rotation via a normalized 4-Gaussian quaternion."""
        q = rng.normal(size=4)
        return Rotation.from_quaternion(*q)

    def compose(self, other: "Rotation") -> "Rotation":
        """self after other (matrix product of the SU(2) representatives)."""
        a, b = self.lam, self.mu
        c, d = other.lam, other.mu
        return Rotation(a * c - b * np.conj(d), a * d + b * np.conj(c))

    def inverse(self) -> "Rotation":
        return Rotation(np.conj(self.lam), -self.mu)

    def matrix(self) -> np.ndarray:
        """The SO(3) matrix of this rotation."""
        if self._matrix is None:
            w, z = self.lam.real, self.lam.imag
            y, x = -self.mu.real, self.mu.imag
            m = np.array(
                [
                    [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                    [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                    [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
                ]
            )
            object.__setattr__(self, "_matrix", m)
        return self._matrix

    def apply(self, p: np.ndarray) -> np.ndarray:
        """Rotate one or many sphere points."""
        return np.asarray(p, dtype=float) @ self.matrix().T


def apply_mobius(r: Rotation, z):
    """Evaluate the Mobius map of r on the extended plane."""
    lam, mu = r.lam, r.mu
    if z is INF:
        num, den = lam, -np.conj(mu)
    else:
        z = complex(z)
        num = lam * z + mu
        den = -np.conj(mu) * z + np.conj(lam)
    if abs(den) <= abs(num) * _POLE_TOL or den == 0:
        return INF
    return num / den


@dataclass(frozen=True)
class GreatCircle:
    """A parametrized great circle with a distinguished axis."""

    axis: np.ndarray
    e1: np.ndarray
    e2: np.ndarray

    def points(self, n: int) -> np.ndarray:
        """n points cos(t) e1 + sin(t) e2 for t uniform in [0, 2 pi)."""
        t = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
        return np.outer(np.cos(t), self.e1) + np.outer(np.sin(t), self.e2)

    def point(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.outer(np.cos(t), self.e1) + np.outer(np.sin(t), self.e2)


def random_great_circle(rng: np.random.Generator) -> GreatCircle:
    """A Haar-uniform rotated copy of a meridian (axis uniform on S^2)."""
    r = Rotation.random(rng)
    m = r.matrix()
    return GreatCircle(axis=m[:, 2], e1=m[:, 0], e2=m[:, 1])
