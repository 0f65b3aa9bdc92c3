"""Pairwise 2x2 kernels between planes, and the common-lines datum.

All blocks map plane y coordinates to plane x coordinates:

* common lines      C(x, y) = c_xy c_yx^T, with c the common line u = x cross y
* orthographic      O(x, y) = o_xy o_yx^T, with o_xy the normalized Pr_x(y)
* parallel transport T(x, y), the geodesic rotation y -> x restricted to P_y

and T = C - O holds identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sphere import (
    SEPARATION_GUARD,
    AntipodalOrEqual,
    DirectionSet,
    check_separated,
    geodesic_rotations,
    line_separation,
)

UNIT_TOL = 1e-9

ORACLE = "oracle"
DETECTED = "detected"


class MalformedDatum(ValueError):
    """A datum is missing a pair, has a bad index, or non-unit lines."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


def common_line_directions(px, py):
    """In-plane coordinates (c_xy, c_yx) of the common line u = x cross y."""
    check_separated(px.normal, py.normal)
    u = np.cross(px.normal, py.normal)
    u /= np.linalg.norm(u)
    return px.coords(u), py.coords(u)


def common_block(c_xy, c_yx):
    c_xy = np.asarray(c_xy, dtype=float)
    c_yx = np.asarray(c_yx, dtype=float)
    for c in (c_xy, c_yx):
        if c.shape != (2,) or abs(np.linalg.norm(c) - 1.0) > UNIT_TOL:
            raise ValueError("common-line directions must be unit 2-vectors")
    return np.outer(c_xy, c_yx)


def orthographic_directions(px, py):
    """(o_xy, o_yx): normalized projection of y on P_x and of x on P_y."""
    check_separated(px.normal, py.normal)
    o_xy = px.coords(py.normal)
    o_yx = py.coords(px.normal)
    return o_xy / np.linalg.norm(o_xy), o_yx / np.linalg.norm(o_yx)


def orthographic_block(px, py):
    o_xy, o_yx = orthographic_directions(px, py)
    return np.outer(o_xy, o_yx)


def transport_block(px, py):
    """Parallel translation P_y -> P_x along the great circle from y to x."""
    check_separated(px.normal, py.normal)
    rot = geodesic_rotations(py.normal[None], px.normal[None])[0]
    return px.embedding.T @ rot @ py.embedding


def lift_block(block, px, py):
    """The 3x3 operator i_x B i_y^T, independent of the chosen frames."""
    return px.embedding @ block @ py.embedding.T


# Batched versions over index arrays (i, j); these skip separation checks and
# are meant for assembly over an already-validated DirectionSet.


def pair_common_lines(ds, i, j):
    x, y = ds.points[i], ds.points[j]
    u = np.cross(x, y)
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    c_ij = np.stack([np.sum(ds.b1[i] * u, 1), np.sum(ds.b2[i] * u, 1)], axis=1)
    c_ji = np.stack([np.sum(ds.b1[j] * u, 1), np.sum(ds.b2[j] * u, 1)], axis=1)
    return c_ij, c_ji


def pair_orthographic(ds, i, j):
    x, y = ds.points[i], ds.points[j]
    o_ij = np.stack([np.sum(ds.b1[i] * y, 1), np.sum(ds.b2[i] * y, 1)], axis=1)
    o_ji = np.stack([np.sum(ds.b1[j] * x, 1), np.sum(ds.b2[j] * x, 1)], axis=1)
    o_ij /= np.linalg.norm(o_ij, axis=1, keepdims=True)
    o_ji /= np.linalg.norm(o_ji, axis=1, keepdims=True)
    return o_ij, o_ji


def pair_blocks(ds, i, j, kind):
    """(M, 2, 2) kernel blocks for the ordered pairs (i[m], j[m])."""
    i = np.asarray(i)
    j = np.asarray(j)
    if kind == "common":
        a, b = pair_common_lines(ds, i, j)
        return a[:, :, None] * b[:, None, :]
    if kind == "orthographic":
        a, b = pair_orthographic(ds, i, j)
        return a[:, :, None] * b[:, None, :]
    if kind == "transport":
        rot = geodesic_rotations(ds.points[j], ds.points[i])
        emb = ds.embeddings
        return np.transpose(emb[i], (0, 2, 1)) @ rot @ emb[j]
    raise ValueError(f"unknown kernel kind {kind!r}")


@dataclass
class CommonLinesDatum:
    """Common-line directions for unordered node pairs.

    ``pairs[m] = (i, j)`` with ``i < j``; ``c_ij[m]`` is the common line in the
    coordinates of plane i and ``c_ji[m]`` the same line in plane j. Pairs a
    detector could not resolve are listed in ``excluded`` instead.
    """

    n: int
    pairs: np.ndarray
    c_ij: np.ndarray
    c_ji: np.ndarray
    provenance: str = ORACLE
    metadata: dict = field(default_factory=dict)
    excluded: list = field(default_factory=list)

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        self.c_ij = np.asarray(self.c_ij, dtype=float).reshape(-1, 2)
        self.c_ji = np.asarray(self.c_ji, dtype=float).reshape(-1, 2)
        self.excluded = [tuple(int(v) for v in p) for p in self.excluded]
        if not (len(self.pairs) == len(self.c_ij) == len(self.c_ji)):
            raise MalformedDatum("pairs and line arrays differ in length")
        if self.provenance not in (ORACLE, DETECTED):
            raise MalformedDatum(f"unknown provenance {self.provenance!r}")

    @property
    def n_pairs(self):
        return len(self.pairs)

    def validate(self):
        """Raise MalformedDatum unless every unordered pair is present once."""
        n = self.n
        if n < 2:
            raise MalformedDatum("datum needs at least two nodes")
        seen = np.zeros((n, n), dtype=np.int64)
        for (i, j) in self.pairs:
            if not (0 <= i < j < n):
                raise MalformedDatum(f"invalid pair ({i}, {j})", (int(i), int(j)))
            seen[i, j] += 1
        for (i, j) in self.excluded:
            if not (0 <= i < j < n):
                raise MalformedDatum(f"invalid excluded pair ({i}, {j})", (i, j))
            seen[i, j] += 1
        iu, ju = np.triu_indices(n, k=1)
        counts = seen[iu, ju]
        if np.any(counts == 0):
            k = int(np.argmax(counts == 0))
            raise MalformedDatum(f"missing pair ({iu[k]}, {ju[k]})", (int(iu[k]), int(ju[k])))
        if np.any(counts > 1):
            k = int(np.argmax(counts > 1))
            raise MalformedDatum(f"duplicate pair ({iu[k]}, {ju[k]})", (int(iu[k]), int(ju[k])))
        for arr in (self.c_ij, self.c_ji):
            bad = np.abs(np.linalg.norm(arr, axis=1) - 1.0) > UNIT_TOL
            if np.any(bad):
                i, j = self.pairs[int(np.argmax(bad))]
                raise MalformedDatum(f"non-unit line for pair ({i}, {j})", (int(i), int(j)))

    def lines(self, i, j):
        """(c_ij, c_ji) for an ordered pair, swapping stored roles if i > j."""
        a, b = (i, j) if i < j else (j, i)
        hit = np.nonzero((self.pairs[:, 0] == a) & (self.pairs[:, 1] == b))[0]
        if len(hit) == 0:
            raise MalformedDatum(f"missing pair ({a}, {b})", (a, b))
        m = hit[0]
        return (self.c_ij[m], self.c_ji[m]) if i < j else (self.c_ji[m], self.c_ij[m])

    def block(self, i, j):
        return common_block(*self.lines(i, j))

    def __eq__(self, other):
        if not isinstance(other, CommonLinesDatum):
            return NotImplemented
        return (
            self.n == other.n
            and self.provenance == other.provenance
            and np.array_equal(self.pairs, other.pairs)
            and np.array_equal(self.c_ij, other.c_ij)
            and np.array_equal(self.c_ji, other.c_ji)
            and self.excluded == other.excluded
            and self.metadata == other.metadata
        )


def oracle_datum(ds: DirectionSet) -> CommonLinesDatum:
    """Common lines computed from known geometry instead of images."""
    i, j = np.triu_indices(ds.n, k=1)
    sep = line_separation(ds.points[i], ds.points[j])
    if np.any(sep <= SEPARATION_GUARD):
        k = int(np.argmax(sep <= SEPARATION_GUARD))
        pair = (int(i[k]), int(j[k]))
        raise AntipodalOrEqual(f"pair {pair} is equal or antipodal", pair)
    c_ij, c_ji = pair_common_lines(ds, i, j)
    return CommonLinesDatum(ds.n, np.column_stack([i, j]), c_ij, c_ji, ORACLE)
