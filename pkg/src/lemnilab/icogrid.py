"""Icosahedral geodesic grids: quasi-uniform triangulations of the sphere.

A grid of frequency nu subdivides each of the 20 icosahedron faces into
nu^2 triangles and projects the lattice to the unit sphere, giving
10 nu^2 + 2 vertices with no polar clustering.  Grids are cached since the
tracer reuses the same frequency across Monte Carlo trials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

_PHI = (1.0 + math.sqrt(5.0)) / 2.0

_CORNERS = np.array(
    [
        [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
        [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
        [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
    ],
    dtype=float,
)
_CORNERS /= np.linalg.norm(_CORNERS, axis=1)[:, None]

_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


@dataclass(frozen=True)
class IcoGrid:
    nu: int
    verts: np.ndarray      # (V, 3) unit vectors
    tris: np.ndarray       # (T, 3) vertex ids
    edges: np.ndarray      # (E, 2) vertex ids, sorted pairs
    tri_edges: np.ndarray  # (T, 3) edge ids
    mean_edge_length: float

    @property
    def n_vertices(self) -> int:
        return len(self.verts)


@lru_cache(maxsize=3)
def icosphere(nu: int) -> IcoGrid:
    """Build (or fetch) the geodesic grid of frequency nu >= 1."""
    if nu < 1:
        raise ValueError("frequency must be >= 1")

    edge_pairs = set()
    for f in _FACES:
        for u, v in ((f[0], f[1]), (f[0], f[2]), (f[1], f[2])):
            edge_pairs.add((min(u, v), max(u, v)))
    edge_pairs = sorted(edge_pairs)
    assert len(edge_pairs) == 30
    edge_ids = {pair: k for k, pair in enumerate(edge_pairs)}

    n_verts = 12 + 30 * (nu - 1) + 20 * (nu - 1) * (nu - 2) // 2
    verts = np.zeros((n_verts, 3))
    tris = []

    for fi, f in enumerate(_FACES):
        a, b, c = f

        def gid_fn(u, v, k):
            # k counts from corner u toward corner v; the stored edge runs
            # from the smaller corner id to the larger
            if (u, v) in edge_ids:
                eid, kk = edge_ids[(u, v)], k
            else:
                eid, kk = edge_ids[(v, u)], nu - k
            return 12 + eid * (nu - 1) + (kk - 1)

        ii, jj = np.meshgrid(np.arange(nu + 1), np.arange(nu + 1), indexing="ij")
        keep = ii + jj <= nu
        i, j = ii[keep], jj[keep]
        ids = np.empty(len(i), dtype=np.int64)

        ids[(i == 0) & (j == 0)] = a
        ids[(i == nu) & (j == 0)] = b
        ids[(i == 0) & (j == nu)] = c
        for mask, (u, v, kk) in (
            ((j == 0) & (i > 0) & (i < nu), (a, b, i)),
            ((i == 0) & (j > 0) & (j < nu), (a, c, j)),
            ((i + j == nu) & (i > 0) & (i < nu), (b, c, j)),
        ):
            if np.any(mask):
                ids[mask] = gid_fn(int(u), int(v), kk[mask])

        m = (i > 0) & (j > 0) & (i + j < nu)
        if np.any(m):
            im, jm = i[m], j[m]
            before = (im - 1) * (nu - 1) - (im - 1) * im // 2
            n_int = (nu - 1) * (nu - 2) // 2
            ids[m] = 12 + 30 * (nu - 1) + fi * n_int + before + (jm - 1)

        pos = (
            np.outer(nu - i - j, _CORNERS[a])
            + np.outer(i, _CORNERS[b])
            + np.outer(j, _CORNERS[c])
        ) / nu
        pos /= np.linalg.norm(pos, axis=1)[:, None]
        verts[ids] = pos

        gi = np.full((nu + 1, nu + 1), -1, dtype=np.int64)
        gi[i, j] = ids

        iu, ju = np.meshgrid(np.arange(nu), np.arange(nu), indexing="ij")
        up = iu + ju <= nu - 1
        tris.append(
            np.stack([gi[iu[up], ju[up]], gi[iu[up] + 1, ju[up]], gi[iu[up], ju[up] + 1]], axis=1)
        )
        dn = iu + ju <= nu - 2
        if np.any(dn):
            tris.append(
                np.stack(
                    [gi[iu[dn] + 1, ju[dn]], gi[iu[dn] + 1, ju[dn] + 1], gi[iu[dn], ju[dn] + 1]],
                    axis=1,
                )
            )

    tris = np.concatenate(tris).astype(np.int64)
    pairs = np.sort(tris[:, [0, 1, 0, 2, 1, 2]].reshape(-1, 2), axis=1)
    keys = pairs[:, 0] * np.int64(n_verts) + pairs[:, 1]
    uniq, inverse = np.unique(keys, return_inverse=True)
    edges = np.stack([uniq // n_verts, uniq % n_verts], axis=1)
    tri_edges = inverse.reshape(-1, 3)

    d = np.einsum("ij,ij->i", verts[edges[:, 0]], verts[edges[:, 1]])
    mean_len = float(np.mean(np.arccos(np.clip(d, -1, 1))))
    return IcoGrid(nu, verts, tris, edges.astype(np.int64), tri_edges.astype(np.int64), mean_len)
