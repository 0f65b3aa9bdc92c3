"""Points on the unit sphere, frames for their orthogonal planes, sampling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Pairs closer than this (in radians) to equality or antipodality are rejected.
SEPARATION_GUARD = 1e-6
# |x . e_z| above this switches the canonical frame to the e_y reference.
POLE_THRESHOLD = 0.99

_EY = np.array([0.0, 1.0, 0.0])
_EZ = np.array([0.0, 0.0, 1.0])


class AntipodalOrEqual(ValueError):
    """Two directions are (numerically) equal or antipodal."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


def normalize(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise ValueError("cannot normalize a zero vector")
    return v / n


def line_separation(x, y):
    """Angle between the lines through x and y, in [0, pi/2].

    Uses the cross product so that tiny angles are resolved accurately.
    """
    s = np.linalg.norm(np.cross(x, y), axis=-1)
    c = np.abs(np.sum(np.asarray(x) * np.asarray(y), axis=-1))
    return np.arctan2(s, c)


def check_separated(x, y, pair=None):
    if line_separation(x, y) <= SEPARATION_GUARD:
        raise AntipodalOrEqual(
            f"directions are equal or antipodal within {SEPARATION_GUARD} rad", pair
        )


@dataclass(frozen=True)
class PlaneBasis:
    """Right-handed orthonormal frame (b1, b2, normal) of the plane normal^perp.

    The 3x2 matrix ``[b1 b2]`` is the embedding of plane coordinates into
    space.
    """

    b1: np.ndarray
    b2: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        for name in ("b1", "b2", "normal"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        gram = self.matrix3.T @ self.matrix3
        if np.max(np.abs(gram - np.eye(3))) > 1e-10:
            raise ValueError("frame vectors are not orthonormal")
        if np.max(np.abs(np.cross(self.b1, self.b2) - self.normal)) > 1e-10:
            raise ValueError("frame is not right-handed")

    @property
    def embedding(self):
        """The 3x2 matrix sending plane coordinates (a, b) to a*b1 + b*b2."""
        return np.column_stack([self.b1, self.b2])

    @property
    def matrix3(self):
        return np.column_stack([self.b1, self.b2, self.normal])

    def lift(self, coords):
        return self.embedding @ np.asarray(coords, dtype=float)

    def coords(self, v):
        """Coordinates of the orthogonal projection of v onto the plane."""
        return self.embedding.T @ np.asarray(v, dtype=float)

    def projector(self):
        e = self.embedding
        return e @ e.T

    def rotated(self, gamma):
        """Same plane, frame turned in-plane by angle gamma (normal fixed)."""
        c, s = np.cos(gamma), np.sin(gamma)
        return PlaneBasis(c * self.b1 + s * self.b2, -s * self.b1 + c * self.b2, self.normal)


def canonical_frames(points):
    """Vectorized canonical frames for an (N, 3) array of unit vectors.

    b1 = normalize(e_z x p) unless |p . e_z| > 0.99, then normalize(e_y x p);
    b2 = p x b1.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    near_pole = np.abs(points[:, 2]) > POLE_THRESHOLD
    ref = np.where(near_pole[:, None], _EY, _EZ)
    b1 = normalize(np.cross(ref, points))
    b2 = np.cross(points, b1)
    return b1, b2


def canonical_frame(x):
    x = np.asarray(x, dtype=float)
    b1, b2 = canonical_frames(x[None, :])
    return PlaneBasis(b1[0], b2[0], x)


def _min_pair_separation(points):
    """Smallest line separation over all pairs and the offending pair."""
    n = len(points)
    if n < 2:
        return np.inf, None
    gram = np.abs(points @ points.T)
    np.fill_diagonal(gram, -np.inf)
    i, j = np.unravel_index(np.argmax(gram), gram.shape)
    return float(line_separation(points[i], points[j])), (int(min(i, j)), int(max(i, j)))


@dataclass(frozen=True)
class DirectionSet:
    """N viewing directions with a frame for each orthogonal plane.

    Stored as arrays: ``points`` (N, 3), ``b1`` (N, 3), ``b2`` (N, 3), so that
    ``points[k] = b1[k] x b2[k]``.
    """

    points: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    seed: int | None = None
    _frames: tuple = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        arrays = {}
        for name in ("points", "b1", "b2"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 3:
                raise ValueError(f"{name} must have shape (N, 3)")
            arr.setflags(write=False)
            arrays[name] = arr
            object.__setattr__(self, name, arr)
        n = len(arrays["points"])
        if any(len(a) != n for a in arrays.values()):
            raise ValueError("points and frames differ in length")
        p, b1, b2 = arrays["points"], arrays["b1"], arrays["b2"]
        if np.max(np.abs(np.linalg.norm(p, axis=1) - 1.0), initial=0.0) > 1e-12:
            raise ValueError("points must be unit vectors")
        dots = np.stack([np.sum(b1 * b2, 1), np.sum(b1 * p, 1), np.sum(b2 * p, 1)])
        norms = np.stack([np.linalg.norm(b1, axis=1), np.linalg.norm(b2, axis=1)])
        if np.max(np.abs(dots), initial=0.0) > 1e-10 or np.max(np.abs(norms - 1), initial=0.0) > 1e-10:
            raise ValueError("frames are not orthonormal")
        if np.max(np.abs(np.cross(b1, b2) - p), initial=0.0) > 1e-10:
            raise ValueError("frames are not right-handed with normal = point")
        sep, pair = _min_pair_separation(p)
        if sep <= SEPARATION_GUARD:
            raise AntipodalOrEqual(f"points {pair} are equal or antipodal", pair)

    @classmethod
    def from_points(cls, points, seed=None):
        points = normalize(np.atleast_2d(points))
        b1, b2 = canonical_frames(points)
        return cls(points, b1, b2, seed)

    @property
    def n(self):
        return len(self.points)

    def __len__(self):
        return self.n

    @property
    def frames(self):
        if self._frames is None:
            object.__setattr__(
                self,
                "_frames",
                tuple(PlaneBasis(a, b, p) for a, b, p in zip(self.b1, self.b2, self.points)),
            )
        return self._frames

    def frame(self, k):
        return self.frames[k]

    @property
    def embeddings(self):
        """(N, 3, 2) stack of the plane embeddings [b1 b2]."""
        return np.stack([self.b1, self.b2], axis=2)

    def with_frames(self, b1, b2):
        return DirectionSet(self.points, b1, b2, self.seed)

    def rotated_frames(self, gammas):
        """Turn every frame in-plane by its own angle (normals unchanged)."""
        g = np.asarray(gammas, dtype=float)[:, None]
        c, s = np.cos(g), np.sin(g)
        return self.with_frames(c * self.b1 + s * self.b2, -s * self.b1 + c * self.b2)

    def permuted(self, order):
        order = np.asarray(order)
        return DirectionSet(self.points[order], self.b1[order], self.b2[order], self.seed)


def sample_uniform(n, seed):
    """n i.i.d. uniform directions (normalized Gaussians) with canonical frames.

    Any point within SEPARATION_GUARD of an earlier point or its antipode is
    redrawn, so the result always satisfies the DirectionSet guard.
    """
    if n < 2:
        raise ValueError("need at least two directions")
    rng = np.random.default_rng(seed)
    points = normalize(rng.standard_normal((n, 3)))
    while True:
        gram = np.abs(points @ points.T)
        cross_norm = np.sqrt(np.clip(1.0 - gram**2, 0.0, None))
        too_close = np.triu(np.arctan2(cross_norm, gram) <= SEPARATION_GUARD * 2, k=1)
        # the coarse screen above is refined with the accurate cross-product test
        bad = set()
        for i, j in zip(*np.nonzero(too_close)):
            if line_separation(points[i], points[j]) <= SEPARATION_GUARD:
                bad.add(int(j))
        if not bad:
            break
        for j in sorted(bad):
            points[j] = normalize(rng.standard_normal(3))
    b1, b2 = canonical_frames(points)
    return DirectionSet(points, b1, b2, seed)


def geodesic_rotation(src, dst):
    """Rotation in span{src, dst} taking src to dst and fixing their normal."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    check_separated(src, dst)
    return geodesic_rotations(src[None], dst[None])[0]


def geodesic_rotations(src, dst):
    """Batched geodesic_rotation for (M, 3) arrays; no separation checks."""
    axis = np.cross(src, dst)
    s = np.linalg.norm(axis, axis=1)
    c = np.sum(src * dst, axis=1)
    k = axis / s[:, None]
    K = np.zeros((len(k), 3, 3))
    K[:, 0, 1], K[:, 0, 2] = -k[:, 2], k[:, 1]
    K[:, 1, 0], K[:, 1, 2] = k[:, 2], -k[:, 0]
    K[:, 2, 0], K[:, 2, 1] = -k[:, 1], k[:, 0]
    return np.eye(3) + s[:, None, None] * K + (1.0 - c)[:, None, None] * (K @ K)
