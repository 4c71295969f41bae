"""Simplicial meshes for curves (m=1) and surfaces (m=2) in R^n.

Faces are oriented simplices given by vertex index tuples; a mesh is closed
when every (m-1)-face is shared by exactly two m-faces with opposite induced
orientation. OFF and OBJ readers/writers round-trip coordinates losslessly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import TopologyError, UnsupportedInputError

__all__ = [
    "TriMesh",
    "euler_characteristic",
    "icosphere",
    "torus_mesh",
    "polygon_circle",
    "mesh_disjoint_union",
    "read_off",
    "write_off",
    "read_obj",
    "write_obj",
]


@dataclass
class TriMesh:
    """Oriented simplicial m-manifold mesh (m in {1, 2})."""

    vertices: np.ndarray   # (V, n) float
    faces: np.ndarray      # (F, m+1) int
    m: int

    closed: bool = field(init=False)
    oriented: bool = field(init=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.faces = np.ascontiguousarray(self.faces, dtype=int)
        if self.m not in (1, 2):
            raise UnsupportedInputError("mesh dimension m must be 1 or 2")
        if self.faces.shape[1] != self.m + 1:
            raise UnsupportedInputError("face tuples must have m+1 vertex ids")
        if not np.all(np.isfinite(self.vertices)):
            raise UnsupportedInputError("mesh has non-finite vertex coordinates")
        if np.any(self.measures() <= 0.0):
            raise TopologyError("mesh contains a degenerate simplex")
        self.closed, self.oriented = self._check_topology()

    # -- structure -----------------------------------------------------

    @property
    def n(self) -> int:
        return self.vertices.shape[1]

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    def _sub_faces(self):
        """Directed (m-1)-faces with induced orientation, per face."""
        f = self.faces
        if self.m == 1:
            # boundary of the segment (a, b): +b, -a
            return [(f[:, 1], +1), (f[:, 0], -1)]
        # edges of (a, b, c): (a,b), (b,c), (c,a)
        return [(f[:, [0, 1]], None), (f[:, [1, 2]], None), (f[:, [2, 0]], None)]

    def _check_topology(self):
        if self.m == 1:
            heads = np.bincount(self.faces[:, 1], minlength=self.num_vertices)
            tails = np.bincount(self.faces[:, 0], minlength=self.num_vertices)
            used = heads + tails > 0
            closed = bool(np.all(heads[used] == 1) and np.all(tails[used] == 1))
            return closed, closed
        edges = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]],
                                self.faces[:, [2, 0]]])
        key_dir = {}
        for a, b in edges:
            key_dir[(int(a), int(b))] = key_dir.get((int(a), int(b)), 0) + 1
        closed = True
        oriented = True
        for (a, b), cnt in key_dir.items():
            rev = key_dir.get((b, a), 0)
            if cnt > 1 or rev > 1:
                oriented = False
            if cnt + rev != 2:
                closed = False
        return closed and oriented, oriented

    def measures(self) -> np.ndarray:
        """Per-face m-volume (edge lengths / triangle areas)."""
        p = self.vertices[self.faces]
        if self.m == 1:
            return np.linalg.norm(p[:, 1] - p[:, 0], axis=-1)
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        g11 = np.einsum("ij,ij->i", e1, e1)
        g22 = np.einsum("ij,ij->i", e2, e2)
        g12 = np.einsum("ij,ij->i", e1, e2)
        return 0.5 * np.sqrt(np.maximum(g11 * g22 - g12 ** 2, 0.0))

    def total_volume(self) -> float:
        return float(np.sum(self.measures()))

    def face_centroids(self) -> np.ndarray:
        return self.vertices[self.faces].mean(axis=1)

    def face_normals(self) -> np.ndarray:
        """Unit normals from the face winding (m=2, n=3 only)."""
        if self.m != 2 or self.n != 3:
            raise UnsupportedInputError("face normals need m=2 meshes in R^3")
        p = self.vertices[self.faces]
        nrm = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        return nrm / np.linalg.norm(nrm, axis=-1, keepdims=True)

    def vertex_neighbors(self):
        """Adjacency lists (1-ring) from shared faces."""
        nbr = [set() for _ in range(self.num_vertices)]
        for f in self.faces:
            for i in f:
                for j in f:
                    if i != j:
                        nbr[int(i)].add(int(j))
        return [sorted(s) for s in nbr]

    def vertex_rings(self, depth=2):
        one = self.vertex_neighbors()
        rings = []
        for v in range(self.num_vertices):
            seen = {v}
            frontier = set(one[v])
            seen |= frontier
            for _ in range(depth - 1):
                nxt = set()
                for u in frontier:
                    nxt |= set(one[u])
                frontier = nxt - seen
                seen |= frontier
            seen.discard(v)
            rings.append(sorted(seen))
        return rings

    def vertex_faces(self):
        vf = [[] for _ in range(self.num_vertices)]
        for k, f in enumerate(self.faces):
            for i in f:
                vf[int(i)].append(k)
        return vf

    def vertex_weights(self) -> np.ndarray:
        """Lumped quadrature weights: 1/(m+1) of adjacent face measures."""
        w = np.zeros(self.num_vertices)
        meas = self.measures()
        for k, f in enumerate(self.faces):
            share = meas[k] / (self.m + 1)
            for i in f:
                w[int(i)] += share
        return w

    def components(self) -> np.ndarray:
        """Connected-component id per vertex (via shared faces)."""
        parent = np.arange(self.num_vertices)

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for f in self.faces:
            r = find(int(f[0]))
            for i in f[1:]:
                parent[find(int(i))] = r
        roots = np.array([find(i) for i in range(self.num_vertices)])
        _, comp = np.unique(roots, return_inverse=True)
        return comp

    def local_scale(self) -> np.ndarray:
        """Mean incident edge length per vertex."""
        nbr = self.vertex_neighbors()
        out = np.zeros(self.num_vertices)
        for v, ns in enumerate(nbr):
            if ns:
                d = np.linalg.norm(self.vertices[ns] - self.vertices[v], axis=-1)
                out[v] = float(np.mean(d))
        return out

    def min_nonneighbor_distance(self) -> float:
        """Min distance between vertices not sharing any face."""
        nbr = self.vertex_neighbors()
        pts = self.vertices
        d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        mask = np.ones_like(d2, dtype=bool)
        np.fill_diagonal(mask, False)
        for v, ns in enumerate(nbr):
            mask[v, ns] = False
        if not mask.any():
            return math.inf
        return float(np.sqrt(d2[mask].min()))

    def translated(self, shift) -> "TriMesh":
        return TriMesh(self.vertices + np.asarray(shift, dtype=float),
                       self.faces.copy(), self.m)

    def with_vertices(self, vertices) -> "TriMesh":
        return TriMesh(np.asarray(vertices, dtype=float), self.faces.copy(),
                       self.m)


def euler_characteristic(mesh: TriMesh) -> int:
    """V - E + F for closed surface meshes; 0 for closed curves."""
    if not mesh.closed:
        raise TopologyError("Euler characteristic requires a closed mesh")
    if mesh.m == 1:
        return 0
    edges = set()
    for a, b, c in mesh.faces:
        for e in ((a, b), (b, c), (c, a)):
            edges.add(frozenset((int(e[0]), int(e[1]))))
    used = np.unique(mesh.faces)
    return int(len(used) - len(edges) + mesh.num_faces)


# ----------------------------------------------------------------------
# generators
# ----------------------------------------------------------------------

def icosphere(subdiv=1, radius=1.0, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Subdivided icosahedron projected to the sphere, outward oriented."""
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=float)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = list(map(tuple, verts))
    for _ in range(subdiv):
        cache = {}
        new_faces = []

        def midpoint(i, j):
            key = frozenset((i, j))
            if key in cache:
                return cache[key]
            p = np.array(verts[i]) + np.array(verts[j])
            p /= np.linalg.norm(p)
            verts.append(tuple(p))
            cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    pts = np.asarray(verts) * float(radius) + np.asarray(center, dtype=float)
    mesh = TriMesh(pts, np.asarray(faces), 2)
    # Ensure outward orientation.
    ctr = np.asarray(center, dtype=float)
    nrm = mesh.face_normals()
    outward = np.einsum("ij,ij->i", nrm, mesh.face_centroids() - ctr)
    if np.mean(outward > 0) < 0.5:
        mesh = TriMesh(pts, mesh.faces[:, ::-1], 2)
    return mesh


def torus_mesh(n_u=24, n_v=48, major=2.0, minor=0.5) -> TriMesh:
    th = 2 * math.pi * np.arange(n_u) / n_u
    ph = 2 * math.pi * np.arange(n_v) / n_v
    T, P = np.meshgrid(th, ph, indexing="ij")
    w = major + minor * np.cos(T)
    pts = np.stack([w * np.cos(P), w * np.sin(P), minor * np.sin(T)],
                   axis=-1).reshape(-1, 3)
    faces = []
    for i in range(n_u):
        for j in range(n_v):
            a = i * n_v + j
            b = ((i + 1) % n_u) * n_v + j
            c = ((i + 1) % n_u) * n_v + (j + 1) % n_v
            d = i * n_v + (j + 1) % n_v
            faces += [(a, b, c), (a, c, d)]
    return TriMesh(pts, np.asarray(faces), 2)


def polygon_circle(n=64, radius=1.0, center=(0.0, 0.0)) -> TriMesh:
    th = 2 * math.pi * np.arange(n) / n
    pts = np.stack([radius * np.cos(th), radius * np.sin(th)], axis=-1)
    pts = pts + np.asarray(center, dtype=float)
    faces = np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=-1)
    return TriMesh(pts, faces, 1)


def mesh_disjoint_union(a: TriMesh, b: TriMesh) -> TriMesh:
    if a.m != b.m or a.n != b.n:
        raise UnsupportedInputError("disjoint union requires matching dimensions")
    verts = np.concatenate([a.vertices, b.vertices])
    faces = np.concatenate([a.faces, b.faces + a.num_vertices])
    return TriMesh(verts, faces, a.m)


# ----------------------------------------------------------------------
# file IO (ASCII OFF / OBJ); floats printed with 17 significant digits
# ----------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_off(mesh: TriMesh, path) -> None:
    lines = ["OFF", f"{mesh.num_vertices} {mesh.num_faces} 0"]
    for v in mesh.vertices:
        lines.append(" ".join(_fmt(x) for x in v))
    for f in mesh.faces:
        lines.append(str(len(f)) + " " + " ".join(str(int(i)) for i in f))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_off(path, m=None) -> TriMesh:
    with open(path) as fh:
        tokens = []
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise UnsupportedInputError(f"{path}: not an OFF file")
    nv, nf = int(tokens[1]), int(tokens[2])
    pos = 4
    # Vertex dimensionality is inferred from the layout.
    remaining = tokens[pos:]
    # try n=3 first, fall back to n=2
    for n in (3, 2):
        need = nv * n
        if len(remaining) > need:
            try:
                cnt = int(remaining[need])
            except ValueError:
                continue
            if cnt in (2, 3):
                verts = np.array(remaining[:need], dtype=float).reshape(nv, n)
                idx = need
                faces = []
                for _ in range(nf):
                    c = int(remaining[idx])
                    faces.append([int(t) for t in remaining[idx + 1: idx + 1 + c]])
                    idx += 1 + c
                faces = np.asarray(faces)
                mm = m if m is not None else faces.shape[1] - 1
                return TriMesh(verts, faces, mm)
    raise UnsupportedInputError(f"{path}: malformed OFF file")


def write_obj(mesh: TriMesh, path) -> None:
    lines = []
    for v in mesh.vertices:
        coords = list(v) + [0.0] * (3 - len(v))
        lines.append("v " + " ".join(_fmt(x) for x in coords))
    tag = "l" if mesh.m == 1 else "f"
    for f in mesh.faces:
        lines.append(tag + " " + " ".join(str(int(i) + 1) for i in f))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_obj(path, n=3) -> TriMesh:
    verts, faces, m = [], [], None
    with open(path) as fh:
        for line in fh:
            parts = line.split("#", 1)[0].split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] in ("f", "l"):
                ids = [int(tok.split("/")[0]) - 1 for tok in parts[1:]]
                faces.append(ids)
                m = len(ids) - 1
    if m is None:
        raise UnsupportedInputError(f"{path}: no faces found")
    verts = np.asarray(verts, dtype=float)
    if m == 1 and np.allclose(verts[:, 2], 0.0):
        verts = verts[:, :2]
    return TriMesh(verts, np.asarray(faces), m)
