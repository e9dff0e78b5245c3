"""Icosphere hierarchy: meshes, spiral tables, pooling maps, geodesic fields.

Level ``i`` has ``10 * 4**i + 2`` vertices (level 1 = 42). Level ``i+1`` is
produced from level ``i`` by splitting every edge at its midpoint and
re-projecting to the unit sphere; parent vertices keep their indices, so any
per-vertex field on a coarse level embeds into finer levels without
remapping. Geometry lives on the unit sphere; metric quantities are scaled by
a configurable sphere radius (default 100 mm).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import kernels

DEFAULT_RADIUS_MM = 100.0
DISTANCE_CAP_MM = 300.0
MAX_LEVEL = 7
MESH_MAGIC = b"ICOS"
MESH_VERSION = 1


class MeshFormatError(Exception):
    """Raised when a mesh cache file fails validation."""


def vertex_count(level: int) -> int:
    return 10 * 4**level + 2


def face_count(level: int) -> int:
    return 80 * 4 ** (level - 1)


# ------------------------------------------------------------------ geometry

def _normalize_rows(x):
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def base_icosahedron():
    """Unit icosahedron: cyclic permutations of (0, +-1, +-phi), normalized.

    The x = 0 plane is an exact reflective symmetry of this orientation,
    which the mirror map relies on.
    """
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        (-1.0, phi, 0.0), (1.0, phi, 0.0), (-1.0, -phi, 0.0), (1.0, -phi, 0.0),
        (0.0, -1.0, phi), (0.0, 1.0, phi), (0.0, -1.0, -phi), (0.0, 1.0, -phi),
        (phi, 0.0, -1.0), (phi, 0.0, 1.0), (-phi, 0.0, -1.0), (-phi, 0.0, 1.0),
    ], dtype=np.float64)
    faces = np.array([
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ], dtype=np.int32)
    return _normalize_rows(verts), _orient_outward(_normalize_rows(verts), faces)


def _orient_outward(vertices, faces):
    """Flip any face whose winding is clockwise as seen from outside."""
    a, b, c = vertices[faces[:, 0]], vertices[faces[:, 1]], vertices[faces[:, 2]]
    det = np.einsum("ij,ij->i", a, np.cross(b, c))
    flipped = faces.copy()
    neg = det < 0
    flipped[neg, 1], flipped[neg, 2] = faces[neg, 2], faces[neg, 1]
    return flipped


def _sorted_edges(faces):
    """Unique undirected edges as (min, max) pairs in lexicographic order."""
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    e = np.sort(e, axis=1)
    return np.unique(e, axis=0).astype(np.int32)


def subdivide(vertices, faces):
    """Split every edge at its midpoint; midpoints are appended after the
    parent vertices in lexicographic edge order."""
    n = vertices.shape[0]
    edges = _sorted_edges(faces)
    # encode (a, b) -> midpoint index, via searchsorted over packed keys
    keys = edges[:, 0].astype(np.int64) * n + edges[:, 1].astype(np.int64)
    mids = _normalize_rows((vertices[edges[:, 0]] + vertices[edges[:, 1]]) * 0.5)
    new_vertices = np.concatenate([vertices, mids])

    def midpoint_of(u, v):
        lo = np.minimum(u, v).astype(np.int64)
        hi = np.maximum(u, v).astype(np.int64)
        pos = np.searchsorted(keys, lo * n + hi)
        return (n + pos).astype(np.int32)

    a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
    mab, mbc, mca = midpoint_of(a, b), midpoint_of(b, c), midpoint_of(c, a)
    new_faces = np.concatenate([
        np.stack([a, mab, mca], axis=1),
        np.stack([b, mbc, mab], axis=1),
        np.stack([c, mca, mbc], axis=1),
        np.stack([mab, mbc, mca], axis=1),
    ]).astype(np.int32)
    return new_vertices, new_faces, edges


# ------------------------------------------------------------------- types

@dataclass
class Icosphere:
    """One resolution level. Immutable after construction."""

    level: int
    vertices: np.ndarray          # (V, 3) float64, unit norm
    faces: np.ndarray             # (F, 3) int32, outward CCW winding
    edges: np.ndarray             # (E, 2) int32, (min, max) lexicographic
    radius_mm: float = DEFAULT_RADIUS_MM
    edge_lengths_mm: np.ndarray = field(init=False)
    nbr_indptr: np.ndarray = field(init=False)   # CSR adjacency, sorted
    nbr_indices: np.ndarray = field(init=False)
    nbr_weights: np.ndarray = field(init=False)  # per directed edge, mm
    _vertex_tree: cKDTree = field(init=False, repr=False)
    _face_tree: cKDTree = field(init=False, repr=False)

    def __post_init__(self):
        v = self.vertices
        a, b = v[self.edges[:, 0]], v[self.edges[:, 1]]
        cross = np.linalg.norm(np.cross(a, b), axis=1)
        dot = np.einsum("ij,ij->i", a, b)
        self.edge_lengths_mm = self.radius_mm * np.arctan2(cross, dot)

        n = self.n_vertices
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        w = np.concatenate([self.edge_lengths_mm, self.edge_lengths_mm])
        order = np.lexsort((dst, src))
        src, dst, w = src[order], dst[order], w[order]
        self.nbr_indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.nbr_indptr, src + 1, 1)
        np.cumsum(self.nbr_indptr, out=self.nbr_indptr)
        self.nbr_indices = dst.astype(np.int32)
        self.nbr_weights = w.astype(np.float64)

        self._vertex_tree = cKDTree(v)
        centroids = v[self.faces].mean(axis=1)
        self._face_tree = cKDTree(centroids)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def neighbors_of(self, v: int) -> np.ndarray:
        """Sorted vertex indices adjacent to v."""
        return self.nbr_indices[self.nbr_indptr[v]:self.nbr_indptr[v + 1]]

    def degrees(self) -> np.ndarray:
        return (self.nbr_indptr[1:] - self.nbr_indptr[:-1]).astype(np.int32)

    def nearest_vertex(self, points) -> np.ndarray:
        _, idx = self._vertex_tree.query(points)
        return np.atleast_1d(idx).astype(np.int64)

    def locate_faces(self, points):
        """Spherical point location: containing face and barycentric weights.

        points are direction vectors (need not be normalized). Returns
        (face_idx (N,), bary (N, 3)). Works on any watertight icosphere;
        raises RuntimeError if a point cannot be located.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        n = pts.shape[0]
        face_idx = np.full(n, -1, dtype=np.int64)
        bary = np.zeros((n, 3), dtype=np.float64)
        unresolved = np.arange(n)
        v = self.vertices
        for k in (6, 24, 96):
            if unresolved.size == 0:
                break
            _, cand = self._face_tree.query(pts[unresolved], k=min(k, self.n_faces))
            cand = np.atleast_2d(cand)
            q = pts[unresolved]
            still = np.ones(unresolved.size, dtype=bool)
            for rank in range(cand.shape[1]):
                if not still.any():
                    break
                rows = np.flatnonzero(still)
                fi = cand[rows, rank]
                tri = self.faces[fi]
                a, b, c = v[tri[:, 0]], v[tri[:, 1]], v[tri[:, 2]]
                qq = q[rows]
                # projective barycentric along the ray from the origin
                wa = np.einsum("ij,ij->i", qq, np.cross(b, c))
                wb = np.einsum("ij,ij->i", qq, np.cross(c, a))
                wc = np.einsum("ij,ij->i", qq, np.cross(a, b))
                total = wa + wb + wc
                ok = (total > 0) & (wa >= -1e-9 * total) & (wb >= -1e-9 * total) & (wc >= -1e-9 * total)
                hit = rows[ok]
                face_idx[unresolved[hit]] = fi[ok]
                w = np.stack([wa[ok], wb[ok], wc[ok]], axis=1)
                bary[unresolved[hit]] = np.clip(w / total[ok, None], 0.0, None)
                still[hit] = False
            unresolved = unresolved[still]
        if unresolved.size:
            raise RuntimeError(f"point location failed for {unresolved.size} points")
        bary /= bary.sum(axis=1, keepdims=True)
        return face_idx, bary


@dataclass
class SpiralTable:
    """Fixed-length convolution support: row v = [v, 1-ring of v CCW, pad]."""

    level: int
    length: int
    indices: np.ndarray  # (V, length) int32


@dataclass
class ParentMap:
    """Downsampling groups and upsampling parents between adjacent levels.

    ``pool_groups`` is padded to width ``pool_width`` by repeating the first
    (smallest) member; ``pool_sizes`` holds the true group sizes.
    ``unpool_parents[f]`` is (f, f) for retained vertices and the coarse edge
    endpoints for midpoint vertices.
    """

    level: int                 # fine level
    pool_groups: np.ndarray    # (V_coarse, pool_width) int32, fine indices
    pool_sizes: np.ndarray     # (V_coarse,) int32
    unpool_parents: np.ndarray  # (V_fine, 2) int32, coarse indices

    @property
    def pool_width(self) -> int:
        return self.pool_groups.shape[1]

    def pool_group(self, v: int) -> np.ndarray:
        return self.pool_groups[v, :self.pool_sizes[v]]


@dataclass
class MirrorMap:
    """Vertex permutation realizing reflection across the x = 0 plane."""

    level: int
    map: np.ndarray  # (V,) int32 involution


# -------------------------------------------------------------- construction

def build_icosphere(level: int, radius_mm: float = DEFAULT_RADIUS_MM) -> Icosphere:
    """Construct the icosphere at ``level`` (1..7) by repeated subdivision."""
    if not 1 <= level <= MAX_LEVEL:
        raise ValueError(f"level must be in 1..{MAX_LEVEL}, got {level}")
    v, f = base_icosahedron()
    for _ in range(level):
        v, f, _ = subdivide(v, f)
    return Icosphere(level=level, vertices=v, faces=f, edges=_sorted_edges(f),
                     radius_mm=radius_mm)


def build_spirals(ico: Icosphere, length: int = 7) -> SpiralTable:
    """Spiral index table: center first, then the 1-ring counterclockwise
    (seen from outside), starting at the smallest-index neighbor.

    Degree-5 vertices at full length repeat the center as the final entry, so
    the operator sees the center's features twice instead of zeros.
    """
    if length < 1:
        raise ValueError("spiral length must be >= 1")
    max_row = 1 + int(ico.degrees().max())
    if length > max_row:
        raise ValueError(f"spiral length {length} exceeds 1 + max degree ({max_row})")

    n = ico.n_vertices
    deg = ico.degrees()
    width = int(deg.max())
    nb = np.full((n, width), -1, dtype=np.int64)
    flat = np.repeat(np.arange(n), deg)
    slots = np.arange(ico.nbr_indices.shape[0]) - np.repeat(ico.nbr_indptr[:-1], deg)
    nb[flat, slots] = ico.nbr_indices

    normal = ico.vertices                                  # outward normal = position
    pos = np.where(nb[..., None] >= 0, ico.vertices[np.clip(nb, 0, None)], 0.0)
    tang = pos - np.einsum("vwj,vj->vw", pos, normal)[..., None] * normal[:, None, :]
    t1 = tang[:, 0, :]
    t1 = t1 / np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(normal, t1)
    ang = np.arctan2(np.einsum("vwj,vj->vw", tang, t2),
                     np.einsum("vwj,vj->vw", tang, t1))
    ang = np.mod(ang, 2.0 * np.pi)
    ang[nb < 0] = np.inf
    order = np.argsort(ang, axis=1, kind="stable")
    ring = np.take_along_axis(nb, order, axis=1)

    table = np.empty((n, 1 + width), dtype=np.int32)
    table[:, 0] = np.arange(n)
    table[:, 1:] = ring
    pad = table < 0
    table[pad] = np.broadcast_to(np.arange(n)[:, None], table.shape)[pad]
    return SpiralTable(level=ico.level, length=length, indices=np.ascontiguousarray(table[:, :length]))


def build_parent_map(coarse: Icosphere, fine: Icosphere) -> ParentMap:
    """Index maps between adjacent levels (fine = coarse subdivided once)."""
    if fine.level != coarse.level + 1:
        raise ValueError(f"level mismatch: fine {fine.level} != coarse {coarse.level} + 1")
    n_coarse = coarse.n_vertices
    n_fine = fine.n_vertices

    deg = fine.degrees()[:n_coarse]
    width = int(deg.max()) + 1
    sizes = (deg + 1).astype(np.int32)
    g = np.full((n_coarse, width), n_fine, dtype=np.int64)  # sentinel pads
    g[:, 0] = np.arange(n_coarse)
    flat = np.repeat(np.arange(n_coarse), deg)
    indptr = fine.nbr_indptr[:n_coarse + 1]
    slots = np.arange(indptr[-1]) - np.repeat(indptr[:-1], deg)
    g[flat, slots + 1] = fine.nbr_indices[:indptr[-1]]
    g.sort(axis=1)  # members ascending; sentinels trail
    pad = g == n_fine
    g[pad] = np.broadcast_to(g[:, :1], g.shape)[pad]  # pad by repeating smallest member
    groups = g.astype(np.int32)

    unpool = np.empty((n_fine, 2), dtype=np.int32)
    retained = np.arange(n_coarse, dtype=np.int32)
    unpool[:n_coarse, 0] = retained
    unpool[:n_coarse, 1] = retained
    # midpoint vertices were appended in lexicographic edge order
    unpool[n_coarse:] = coarse.edges
    return ParentMap(level=fine.level, pool_groups=groups, pool_sizes=sizes,
                     unpool_parents=unpool)


def build_mirror_map(ico: Icosphere) -> MirrorMap:
    """Match every vertex to its reflection through x = 0."""
    reflected = ico.vertices.copy()
    reflected[:, 0] *= -1.0
    dist, idx = ico._vertex_tree.query(reflected)
    if np.max(dist) > 1e-9:
        raise RuntimeError(
            f"mirror construction failed: worst match {np.max(dist):.3e} exceeds 1e-9")
    perm = idx.astype(np.int32)
    if not np.array_equal(perm[perm], np.arange(ico.n_vertices)):
        raise RuntimeError("mirror construction failed: map is not an involution")
    return MirrorMap(level=ico.level, map=perm)


# ------------------------------------------------------------ distance fields

def geodesic_distance(ico: Icosphere, source_set, cap_mm: float = DISTANCE_CAP_MM) -> np.ndarray:
    """Graph-geodesic distance (mm) from every vertex to the nearest source.

    Dijkstra over edge arc lengths. An empty source set yields ``cap_mm``
    everywhere (the convention for hemispheres with nothing to measure
    against). Distances themselves are not capped.
    """
    sources = np.asarray(list(source_set) if isinstance(source_set, (set, frozenset))
                         else source_set, dtype=np.int64).ravel()
    if sources.size == 0:
        return np.full(ico.n_vertices, float(cap_mm))
    if sources.min() < 0 or sources.max() >= ico.n_vertices:
        raise ValueError("source vertex index out of range")
    return kernels.dijkstra(ico.nbr_indptr, ico.nbr_indices, ico.nbr_weights,
                            sources, ico.n_vertices)


def lesion_boundary(ico: Icosphere, mask) -> np.ndarray:
    """Mask-positive vertices having at least one mask-negative neighbor."""
    m = np.asarray(mask).astype(bool)
    if m.shape[0] != ico.n_vertices:
        raise ValueError(f"mask length {m.shape[0]} != vertex count {ico.n_vertices}")
    a, b = ico.edges[:, 0], ico.edges[:, 1]
    out = np.zeros(ico.n_vertices, dtype=bool)
    np.logical_or.at(out, a, m[a] & ~m[b])
    np.logical_or.at(out, b, m[b] & ~m[a])
    return np.flatnonzero(out)


def normalized_boundary_distance(ico: Icosphere, mask,
                                 cap_mm: float = DISTANCE_CAP_MM) -> np.ndarray:
    """Regression target: 0 on the lesion, capped/normalized geodesic
    distance to the lesion boundary outside, 1 everywhere when no lesion."""
    m = np.asarray(mask).astype(bool)
    boundary = lesion_boundary(ico, m)
    if boundary.size == 0 and not m.any():
        return np.ones(ico.n_vertices, dtype=np.float64)
    d = geodesic_distance(ico, boundary, cap_mm=cap_mm)
    d = np.minimum(d, cap_mm) / cap_mm
    d[m] = 0.0
    return d


# ----------------------------------------------------------------- hierarchy

class MeshHierarchy:
    """Icospheres 1..max_level plus spiral/parent/mirror tables."""

    def __init__(self, icospheres, spirals, parent_maps, mirrors):
        self.icospheres = icospheres      # {level: Icosphere}
        self.spirals = spirals            # {level: SpiralTable}
        self.parent_maps = parent_maps    # {fine_level: ParentMap}
        self.mirrors = mirrors            # {level: MirrorMap}

    @property
    def max_level(self) -> int:
        return max(self.icospheres)

    def ico(self, level: int) -> Icosphere:
        if level not in self.icospheres:
            raise ValueError(f"mesh level {level} not built (have {sorted(self.icospheres)})")
        return self.icospheres[level]

    def spiral(self, level: int) -> SpiralTable:
        return self.spirals[level]

    def parent_map(self, fine_level: int) -> ParentMap:
        if fine_level not in self.parent_maps:
            raise ValueError(f"no parent map for fine level {fine_level}")
        return self.parent_maps[fine_level]

    def mirror(self, level: int) -> MirrorMap:
        return self.mirrors[level]


def build_hierarchy(max_level: int, radius_mm: float = DEFAULT_RADIUS_MM,
                    spiral_length: int = 7) -> MeshHierarchy:
    if not 1 <= max_level <= MAX_LEVEL:
        raise ValueError(f"max_level must be in 1..{MAX_LEVEL}, got {max_level}")
    icospheres, spirals, parents, mirrors = {}, {}, {}, {}
    for level in range(1, max_level + 1):
        ico = build_icosphere(level, radius_mm=radius_mm)
        icospheres[level] = ico
        spirals[level] = build_spirals(ico, spiral_length)
        mirrors[level] = build_mirror_map(ico)
        if level > 1:
            parents[level] = build_parent_map(icospheres[level - 1], ico)
    return MeshHierarchy(icospheres, spirals, parents, mirrors)


# --------------------------------------------------------------- serialization

def _write_array(fh, arr, dtype):
    fh.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def _read_array(fh, count, dtype, what):
    raw = fh.read(count * np.dtype(dtype).itemsize)
    if len(raw) != count * np.dtype(dtype).itemsize:
        raise MeshFormatError(f"truncated file while reading {what}")
    return np.frombuffer(raw, dtype=dtype).copy()


def save_level(path, ico: Icosphere, spiral: SpiralTable,
               parent: ParentMap | None, mirror: MirrorMap):
    """Write one level's tables to a versioned little-endian binary file."""
    with open(path, "wb") as fh:
        fh.write(MESH_MAGIC)
        fh.write(struct.pack("<IId", MESH_VERSION, ico.level, ico.radius_mm))
        fh.write(struct.pack("<I", ico.n_vertices))
        _write_array(fh, ico.vertices, "<f8")
        fh.write(struct.pack("<I", ico.n_faces))
        _write_array(fh, ico.faces, "<u4")
        fh.write(struct.pack("<I", spiral.length))
        _write_array(fh, spiral.indices, "<u4")
        if parent is None:
            fh.write(struct.pack("<I", 0))
        else:
            fh.write(struct.pack("<III", 1, parent.pool_groups.shape[0], parent.pool_width))
            _write_array(fh, parent.pool_groups, "<u4")
            _write_array(fh, parent.pool_sizes, "<u4")
            _write_array(fh, parent.unpool_parents, "<u4")
        _write_array(fh, mirror.map, "<u4")


def load_level(path, radius_mm: float | None = None):
    """Read one level file; returns (Icosphere, SpiralTable, ParentMap|None, MirrorMap)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MESH_MAGIC:
            raise MeshFormatError(f"bad magic {magic!r}, expected {MESH_MAGIC!r}")
        version, level, radius = struct.unpack("<IId", fh.read(16))
        if version != MESH_VERSION:
            raise MeshFormatError(f"unsupported version {version}")
        if not 1 <= level <= MAX_LEVEL:
            raise MeshFormatError(f"level {level} out of range")
        if radius_mm is not None:
            radius = radius_mm
        (n_vertices,) = struct.unpack("<I", fh.read(4))
        if n_vertices != vertex_count(level):
            raise MeshFormatError(f"vertex count {n_vertices} wrong for level {level}")
        vertices = _read_array(fh, n_vertices * 3, "<f8", "vertices").reshape(n_vertices, 3)
        (n_faces,) = struct.unpack("<I", fh.read(4))
        if n_faces != face_count(level):
            raise MeshFormatError(f"face count {n_faces} wrong for level {level}")
        faces = _read_array(fh, n_faces * 3, "<u4", "faces").astype(np.int32).reshape(n_faces, 3)
        (spiral_len,) = struct.unpack("<I", fh.read(4))
        spiral_idx = _read_array(fh, n_vertices * spiral_len, "<u4", "spirals")
        spiral_idx = spiral_idx.astype(np.int32).reshape(n_vertices, spiral_len)
        (has_parent,) = struct.unpack("<I", fh.read(4))
        parent = None
        if has_parent:
            n_coarse, width = struct.unpack("<II", fh.read(8))
            groups = _read_array(fh, n_coarse * width, "<u4", "pool groups")
            sizes = _read_array(fh, n_coarse, "<u4", "pool sizes")
            unpool = _read_array(fh, n_vertices * 2, "<u4", "unpool parents")
            parent = ParentMap(level=level,
                               pool_groups=groups.astype(np.int32).reshape(n_coarse, width),
                               pool_sizes=sizes.astype(np.int32),
                               unpool_parents=unpool.astype(np.int32).reshape(n_vertices, 2))
        mirror_map = _read_array(fh, n_vertices, "<u4", "mirror map").astype(np.int32)
    ico = Icosphere(level=level, vertices=vertices, faces=faces,
                    edges=_sorted_edges(faces), radius_mm=radius)
    spiral = SpiralTable(level=level, length=spiral_len, indices=spiral_idx)
    return ico, spiral, parent, MirrorMap(level=level, map=mirror_map)


def level_filename(level: int) -> str:
    return f"icosphere_l{level}.bin"


def save_hierarchy(hier: MeshHierarchy, out_dir):
    import os
    os.makedirs(out_dir, exist_ok=True)
    for level in sorted(hier.icospheres):
        save_level(os.path.join(out_dir, level_filename(level)),
                   hier.icospheres[level], hier.spirals[level],
                   hier.parent_maps.get(level), hier.mirrors[level])


def load_hierarchy(mesh_dir, max_level: int | None = None) -> MeshHierarchy:
    import os
    icospheres, spirals, parents, mirrors = {}, {}, {}, {}
    level = 1
    while level <= (max_level or MAX_LEVEL):
        path = os.path.join(mesh_dir, level_filename(level))
        if not os.path.exists(path):
            break
        ico, spiral, parent, mirror = load_level(path)
        icospheres[level] = ico
        spirals[level] = spiral
        mirrors[level] = mirror
        if parent is not None:
            parents[level] = parent
        level += 1
    if not icospheres:
        raise MeshFormatError(f"no mesh cache found in {mesh_dir}")
    if max_level is not None and max_level not in icospheres:
        raise MeshFormatError(f"mesh cache in {mesh_dir} stops at level "
                              f"{max(icospheres)}, need {max_level}")
    return MeshHierarchy(icospheres, spirals, parents, mirrors)
