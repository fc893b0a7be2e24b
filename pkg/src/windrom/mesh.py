"""Triangulated 2D domains with tagged boundaries and Taylor-Hood spaces.

Meshes come from two sources: the plain-text ``windmesh`` container
(grammar below) or a Gmsh 2.2 ASCII import, plus a synthetic generator
that lays out rectangular building blocks on a street grid.

windmesh text format, version 1::

    windmesh 1
    vertices <n>
    <x> <y>                 # n lines, float coordinates in meters
    triangles <m>
    <a> <b> <c>             # m lines, 0-based vertex indices, CCW
    boundary <k>
    <a> <b> <tag>           # k lines, tag in {inflow, noslip, outflow}
    clen <l>                # optional characteristic length, meters

Comment lines start with '#'. All boundary edges of the triangulation
must appear exactly once in the boundary section.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, MeshFormatError, MeshValidationError


class BoundaryTag(enum.IntEnum):
    INFLOW = 1
    NOSLIP = 2
    OUTFLOW = 3


_TAG_NAMES = {
    BoundaryTag.INFLOW: "inflow",
    BoundaryTag.NOSLIP: "noslip",
    BoundaryTag.OUTFLOW: "outflow",
}
_NAME_TAGS = {v: k for k, v in _TAG_NAMES.items()}


@dataclass(frozen=True)
class Mesh:
    """Immutable conforming triangulation with tagged boundary edges.

    Attributes
    ----------
    vertices : (n, 2) float array
    triangles : (m, 3) int array, positively oriented
    boundary_edges : (k, 2) int array of vertex pairs
    boundary_tags : (k,) int array of BoundaryTag values
    char_length : characteristic length used in Reynolds numbers
    exact_area : analytic domain area when known (synthetic meshes), else None
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    char_length: float
    exact_area: float | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float))
        object.__setattr__(self, "triangles", np.asarray(self.triangles, dtype=np.int64))
        object.__setattr__(self, "boundary_edges", np.asarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2))
        object.__setattr__(self, "boundary_tags", np.asarray(self.boundary_tags, dtype=np.int64))
        _validate(self)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    def triangle_areas(self):
        """Signed areas of all triangles (positive for a valid mesh)."""
        p = self.vertices
        a, b, c = (p[self.triangles[:, i]] for i in range(3))
        ab, ac = b - a, c - a
        return 0.5 * (ab[:, 0] * ac[:, 1] - ab[:, 1] * ac[:, 0])

    def area(self):
        return float(self.triangle_areas().sum())

    def edges_with_tag(self, tag):
        return self.boundary_edges[self.boundary_tags == int(tag)]

    def boundary_length(self, tag):
        """Total length of boundary edges carrying `tag`."""
        e = self.edges_with_tag(tag)
        if e.size == 0:
            return 0.0
        d = self.vertices[e[:, 1]] - self.vertices[e[:, 0]]
        return float(np.hypot(d[:, 0], d[:, 1]).sum())

    def boundary_loops(self):
        """Boundary decomposed into closed vertex loops.

        Returns (outer, holes): the loop enclosing the largest absolute
        area is the outer boundary, the rest are hole outlines.
        """
        succ = {}
        for a, b in self.boundary_edges:
            succ.setdefault(int(a), []).append(int(b))
            succ.setdefault(int(b), []).append(int(a))
        unvisited = {tuple(sorted(e)) for e in self.boundary_edges.tolist()}
        loops = []
        while unvisited:
            a, b = next(iter(unvisited))
            loop = [a, b]
            unvisited.discard((min(a, b), max(a, b)))
            while True:
                nxt = [v for v in succ[loop[-1]]
                       if (min(v, loop[-1]), max(v, loop[-1])) in unvisited]
                if not nxt:
                    break
                loop.append(nxt[0])
                unvisited.discard((min(nxt[0], loop[-2]), max(nxt[0], loop[-2])))
            if len(loop) > 1 and loop[0] == loop[-1]:
                loop.pop()
            loops.append(loop)

        def loop_area(loop):
            pts = self.vertices[loop]
            x, y = pts[:, 0], pts[:, 1]
            return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

        loops.sort(key=loop_area, reverse=True)
        return loops[0], loops[1:]

    def content_hash(self):
        from .containers import array_hash

        return array_hash(self.vertices, self.triangles, self.boundary_edges, self.boundary_tags)


def _validate(mesh):
    n = mesh.n_vertices
    if mesh.triangles.size and (mesh.triangles.min() < 0 or mesh.triangles.max() >= n):
        raise MeshValidationError("triangle vertex index out of range")
    if mesh.boundary_edges.size and (mesh.boundary_edges.min() < 0 or mesh.boundary_edges.max() >= n):
        raise MeshValidationError("boundary edge vertex index out of range")
    areas = mesh.triangle_areas()
    bad = np.nonzero(areas <= 0)[0]
    if bad.size:
        raise MeshValidationError(f"non-positively-oriented triangles: {bad.tolist()[:10]}")
    if mesh.char_length <= 0:
        raise MeshValidationError("characteristic length must be positive")
    if not np.all(np.isin(mesh.boundary_tags, [int(t) for t in BoundaryTag])):
        raise MeshValidationError("unknown boundary tag value")

    # Tagged edges must coincide with the topological boundary, one tag each.
    topo = _boundary_edge_set(mesh.triangles)
    tagged = {}
    for (a, b), t in zip(mesh.boundary_edges.tolist(), mesh.boundary_tags.tolist()):
        key = (min(a, b), max(a, b))
        if key in tagged:
            raise MeshValidationError(f"boundary edge {key} tagged more than once")
        tagged[key] = t
    missing = sorted(topo - set(tagged))
    if missing:
        raise MeshValidationError(f"untagged boundary edges: {missing[:20]}")
    spurious = sorted(set(tagged) - topo)
    if spurious:
        raise MeshValidationError(f"tagged edges not on the boundary: {spurious[:20]}")


def _boundary_edge_set(triangles):
    """Edges adjacent to exactly one triangle, as sorted vertex pairs."""
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e = np.sort(e, axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    return {tuple(x) for x in uniq[counts == 1].tolist()}


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

def load_mesh(path, format=None):
    """Load a mesh file.

    `format` is "windmesh" or "gmsh"; when None it is inferred from the
    file suffix (.msh -> gmsh, anything else -> windmesh).
    """
    path = str(path)
    if format is None:
        format = "gmsh" if path.endswith(".msh") else "windmesh"
    if format == "windmesh":
        return _load_windmesh(path)
    if format == "gmsh":
        return _load_gmsh(path)
    raise MeshFormatError(f"unknown mesh format {format!r}")


def save_mesh(mesh, path):
    """Write a mesh in the windmesh text format."""
    lines = ["windmesh 1", f"vertices {mesh.n_vertices}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(f"triangles {mesh.n_triangles}")
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    lines.append(f"boundary {len(mesh.boundary_edges)}")
    lines += [
        f"{a} {b} {_TAG_NAMES[BoundaryTag(t)]}"
        for (a, b), t in zip(mesh.boundary_edges.tolist(), mesh.boundary_tags.tolist())
    ]
    lines.append(f"clen {mesh.char_length!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _numbered_lines(path):
    with open(path) as fh:
        for i, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield i, line


def _load_windmesh(path):
    it = _numbered_lines(path)

    def take(what):
        try:
            return next(it)
        except StopIteration:
            raise MeshFormatError(f"unexpected end of file, expected {what}") from None

    ln, header = take("header")
    if header.split() != ["windmesh", "1"]:
        raise MeshFormatError(f"bad header {header!r}, expected 'windmesh 1'", line=ln)

    def section(name):
        ln, line = take(f"'{name} <count>'")
        parts = line.split()
        if len(parts) != 2 or parts[0] != name:
            raise MeshFormatError(f"expected '{name} <count>', got {line!r}", line=ln)
        try:
            return int(parts[1])
        except ValueError:
            raise MeshFormatError(f"bad count {parts[1]!r}", line=ln) from None

    nv = section("vertices")
    verts = np.empty((nv, 2))
    for k in range(nv):
        ln, line = take("vertex line")
        try:
            x, y = line.split()
            verts[k] = float(x), float(y)
        except ValueError:
            raise MeshFormatError(f"bad vertex line {line!r}", line=ln) from None

    nt = section("triangles")
    tris = np.empty((nt, 3), dtype=np.int64)
    for k in range(nt):
        ln, line = take("triangle line")
        try:
            tris[k] = [int(v) for v in line.split()]
        except ValueError:
            raise MeshFormatError(f"bad triangle line {line!r}", line=ln) from None
        if tris[k].min() < 0 or tris[k].max() >= nv:
            raise MeshFormatError(f"vertex index out of range in {line!r}", line=ln)

    nb = section("boundary")
    edges = np.empty((nb, 2), dtype=np.int64)
    tags = np.empty(nb, dtype=np.int64)
    for k in range(nb):
        ln, line = take("boundary line")
        parts = line.split()
        if len(parts) != 3 or parts[2] not in _NAME_TAGS:
            raise MeshFormatError(f"bad boundary line {line!r}", line=ln)
        try:
            edges[k] = int(parts[0]), int(parts[1])
        except ValueError:
            raise MeshFormatError(f"bad boundary line {line!r}", line=ln) from None
        tags[k] = int(_NAME_TAGS[parts[2]])

    clen = None
    for ln, line in it:
        parts = line.split()
        if parts[0] == "clen" and len(parts) == 2:
            clen = float(parts[1])
        else:
            raise MeshFormatError(f"unexpected trailing line {line!r}", line=ln)
    if clen is None:
        clen = _default_char_length(verts, edges, tags)
    return Mesh(verts, tris, edges, tags, clen)


_GMSH_PHYSICAL_DEFAULT = {1: BoundaryTag.INFLOW, 2: BoundaryTag.NOSLIP, 3: BoundaryTag.OUTFLOW}


def _load_gmsh(path):
    """Minimal Gmsh 2.2 ASCII reader: 2-node lines carry boundary tags,
    3-node triangles the domain. Physical names containing 'inflow',
    'noslip'/'wall' or 'outflow' map to tags; otherwise physical ids
    1/2/3 are used directly."""
    sections = {}
    current = None
    with open(path) as fh:
        for i, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("$End"):
                current = None
            elif line.startswith("$"):
                current = line[1:]
                sections[current] = []
            elif current is not None:
                sections[current].append((i, line))

    if "MeshFormat" not in sections or not sections["MeshFormat"][0][1].startswith("2.2"):
        raise MeshFormatError("not a Gmsh 2.2 ASCII file")
    if "Nodes" not in sections or "Elements" not in sections:
        raise MeshFormatError("missing $Nodes or $Elements section")

    name_map = {}
    for ln, line in sections.get("PhysicalNames", [])[1:]:
        parts = line.split(None, 2)
        if len(parts) < 3:
            raise MeshFormatError(f"bad physical name {line!r}", line=ln)
        label = parts[2].strip('"').lower()
        pid = int(parts[1])
        if "inflow" in label or "inlet" in label:
            name_map[pid] = BoundaryTag.INFLOW
        elif "outflow" in label or "outlet" in label:
            name_map[pid] = BoundaryTag.OUTFLOW
        elif "noslip" in label or "wall" in label or "building" in label:
            name_map[pid] = BoundaryTag.NOSLIP

    node_lines = sections["Nodes"]
    n_nodes = int(node_lines[0][1])
    ids = np.empty(n_nodes, dtype=np.int64)
    coords = np.empty((n_nodes, 2))
    for k, (ln, line) in enumerate(node_lines[1 : 1 + n_nodes]):
        parts = line.split()
        if len(parts) < 4:
            raise MeshFormatError(f"bad node line {line!r}", line=ln)
        ids[k] = int(parts[0])
        coords[k] = float(parts[1]), float(parts[2])
    renum = {int(g): k for k, g in enumerate(ids)}

    tris, edges, tags = [], [], []
    elem_lines = sections["Elements"]
    for ln, line in elem_lines[1 : 1 + int(elem_lines[0][1])]:
        parts = [int(v) for v in line.split()]
        etype, ntags = parts[1], parts[2]
        phys = parts[3] if ntags >= 1 else 0
        nodes = parts[3 + ntags :]
        try:
            nodes = [renum[g] for g in nodes]
        except KeyError as exc:
            raise MeshFormatError(f"unknown node id {exc} in element", line=ln) from None
        if etype == 2:
            tris.append(nodes)
        elif etype == 1:
            tag = name_map.get(phys, _GMSH_PHYSICAL_DEFAULT.get(phys))
            if tag is None:
                raise MeshFormatError(f"line element with unmapped physical id {phys}", line=ln)
            edges.append(nodes)
            tags.append(int(tag))

    tris = np.asarray(tris, dtype=np.int64).reshape(-1, 3)
    tris = _orient_ccw(coords, tris)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    tags = np.asarray(tags, dtype=np.int64)
    clen = _default_char_length(coords, edges, tags)
    return Mesh(coords, tris, edges, tags, clen)


def _orient_ccw(verts, tris):
    a, b, c = (verts[tris[:, i]] for i in range(3))
    ab, ac = b - a, c - a
    flip = ab[:, 0] * ac[:, 1] - ab[:, 1] * ac[:, 0] < 0
    tris = tris.copy()
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris


def _default_char_length(verts, edges, tags):
    """Inflow boundary length when present, else the bounding-box diagonal."""
    inflow = edges[tags == int(BoundaryTag.INFLOW)]
    if inflow.size:
        d = verts[inflow[:, 1]] - verts[inflow[:, 0]]
        return float(np.hypot(d[:, 0], d[:, 1]).sum())
    span = verts.max(axis=0) - verts.min(axis=0)
    return float(np.hypot(*span))


# ---------------------------------------------------------------------------
# Synthetic urban layouts
# ---------------------------------------------------------------------------

def synth_urban_mesh(block_rows, block_cols, street_width, refine_level=0,
                     width=1.0, height=1.0, outer="south-inflow"):
    """Rectangle with a regular grid of rectangular building holes.

    Buildings are separated from each other and from the outer boundary
    by streets of the given width. Hole boundaries are tagged NoSlip.
    `outer` selects the outer tagging convention:

    - "south-inflow": south Inflow, north Outflow, east/west NoSlip;
    - "enclosed": the whole outer rectangle is Inflow (Dirichlet data
      everywhere, no Outflow tag).

    refine_level applies that many uniform midpoint refinements, each
    multiplying the triangle count by four.
    """
    if block_rows < 1 or block_cols < 1:
        raise GeometryError("block_rows and block_cols must be >= 1")
    if street_width <= 0:
        raise GeometryError("street_width must be positive")
    bw = (width - (block_cols + 1) * street_width) / block_cols
    bh = (height - (block_rows + 1) * street_width) / block_rows
    if bw <= 0 or bh <= 0:
        raise GeometryError(
            f"street width {street_width} leaves no room for buildings "
            f"({block_rows}x{block_cols} blocks in {width}x{height})"
        )

    xs = _strip_coords(block_cols, street_width, bw, min(street_width, bw, bh))
    ys = _strip_coords(block_rows, street_width, bh, min(street_width, bw, bh))
    nx, ny = len(xs), len(ys)
    vid = np.arange(nx * ny).reshape(ny, nx)
    xg, yg = np.meshgrid(xs, ys)
    verts = np.column_stack([xg.ravel(), yg.ravel()])

    # Cell (j, i) spans [xs[i], xs[i+1]] x [ys[j], ys[j+1]]; building cells
    # are those whose center falls inside a hole rectangle.
    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    in_hole_x = _inside_blocks(cx, block_cols, street_width, bw)
    in_hole_y = _inside_blocks(cy, block_rows, street_width, bh)
    keep = ~(in_hole_y[:, None] & in_hole_x[None, :])

    tris = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            if not keep[j, i]:
                continue
            v00, v10 = vid[j, i], vid[j, i + 1]
            v01, v11 = vid[j + 1, i], vid[j + 1, i + 1]
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    tris = np.asarray(tris, dtype=np.int64)

    verts, tris = _drop_unused_vertices(verts, tris)
    edges, tags = _tag_synthetic_boundary(verts, tris, width, height, outer)
    if outer == "enclosed":
        clen = float(np.hypot(width, height))
    else:
        clen = float(width)
    exact = width * height - block_rows * block_cols * bw * bh
    mesh = Mesh(verts, tris, edges, tags, clen, exact_area=exact)
    for _ in range(refine_level):
        mesh = refine_mesh(mesh)
    return mesh


def _strip_coords(blocks, street, bsize, target):
    """Grid coordinates along one axis: street/building strips subdivided
    to cells no larger than `target`, keeping all strip breakpoints."""
    coords = [0.0]
    for b in range(blocks):
        for size in (street, bsize):
            n = max(1, int(np.ceil(size / target - 1e-12)))
            start = coords[-1]
            coords.extend(start + size * (k + 1) / n for k in range(n))
    n = max(1, int(np.ceil(street / target - 1e-12)))
    start = coords[-1]
    coords.extend(start + street * (k + 1) / n for k in range(n))
    return np.asarray(coords)


def _inside_blocks(centers, blocks, street, bsize):
    inside = np.zeros(len(centers), dtype=bool)
    for b in range(blocks):
        lo = street + b * (street + bsize)
        inside |= (centers > lo) & (centers < lo + bsize)
    return inside


def _drop_unused_vertices(verts, tris):
    used = np.unique(tris)
    remap = -np.ones(len(verts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return verts[used], remap[tris]


def _tag_synthetic_boundary(verts, tris, width, height, outer):
    if outer not in ("south-inflow", "enclosed"):
        raise GeometryError(f"unknown outer tagging convention {outer!r}")
    boundary = sorted(_boundary_edge_set(tris))
    edges = np.asarray(boundary, dtype=np.int64).reshape(-1, 2)
    tags = np.empty(len(edges), dtype=np.int64)
    tol = 1e-12 * max(width, height)
    mid = 0.5 * (verts[edges[:, 0]] + verts[edges[:, 1]])
    south = mid[:, 1] < tol
    north = mid[:, 1] > height - tol
    west = mid[:, 0] < tol
    east = mid[:, 0] > width - tol
    on_outer = south | north | west | east
    tags[:] = int(BoundaryTag.NOSLIP)
    if outer == "south-inflow":
        tags[south] = int(BoundaryTag.INFLOW)
        tags[north] = int(BoundaryTag.OUTFLOW)
    else:
        tags[on_outer] = int(BoundaryTag.INFLOW)
    return edges, tags


def refine_mesh(mesh):
    """Uniform midpoint refinement; the coarse vertex set is preserved."""
    verts = mesh.vertices
    tris = mesh.triangles
    edges = np.concatenate([tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]]])
    edges = np.sort(edges, axis=1)
    uniq, inverse = np.unique(edges, axis=0, return_inverse=True)
    midpoints = 0.5 * (verts[uniq[:, 0]] + verts[uniq[:, 1]])
    new_verts = np.vstack([verts, midpoints])
    mid_id = len(verts) + inverse.reshape(3, -1).T  # (cells, 3): m0=(v1,v2) m1=(v2,v0) m2=(v0,v1)

    v0, v1, v2 = tris[:, 0], tris[:, 1], tris[:, 2]
    m0, m1, m2 = mid_id[:, 0], mid_id[:, 1], mid_id[:, 2]
    new_tris = np.concatenate([
        np.column_stack([v0, m2, m1]),
        np.column_stack([v1, m0, m2]),
        np.column_stack([v2, m1, m0]),
        np.column_stack([m0, m1, m2]),
    ])

    edge_lookup = {(int(a), int(b)): len(verts) + k for k, (a, b) in enumerate(uniq.tolist())}
    new_edges, new_tags = [], []
    for (a, b), t in zip(mesh.boundary_edges.tolist(), mesh.boundary_tags.tolist()):
        m = edge_lookup[(min(a, b), max(a, b))]
        new_edges += [(a, m), (m, b)]
        new_tags += [t, t]
    return Mesh(new_verts, new_tris, np.asarray(new_edges), np.asarray(new_tags),
                mesh.char_length, exact_area=mesh.exact_area)


def unit_square_mesh(n, outer="south-inflow", width=1.0, height=1.0, char_length=None, tags=None):
    """Structured n x n grid of the width x height rectangle, 2n^2 triangles.

    `tags` optionally maps side names ("south","north","west","east") to
    BoundaryTag values, overriding the `outer` convention.
    """
    xs = np.linspace(0.0, width, n + 1)
    ys = np.linspace(0.0, height, n + 1)
    vid = np.arange((n + 1) * (n + 1)).reshape(n + 1, n + 1)
    xg, yg = np.meshgrid(xs, ys)
    verts = np.column_stack([xg.ravel(), yg.ravel()])
    tris = []
    for j in range(n):
        for i in range(n):
            v00, v10 = vid[j, i], vid[j, i + 1]
            v01, v11 = vid[j + 1, i], vid[j + 1, i + 1]
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    tris = np.asarray(tris, dtype=np.int64)

    side_tags = {"south": BoundaryTag.INFLOW, "north": BoundaryTag.OUTFLOW,
                 "west": BoundaryTag.NOSLIP, "east": BoundaryTag.NOSLIP}
    if outer == "enclosed":
        side_tags = {s: BoundaryTag.INFLOW for s in side_tags}
    if tags:
        side_tags.update(tags)

    edges, etags = [], []
    for i in range(n):
        edges.append((vid[0, i], vid[0, i + 1])); etags.append(int(side_tags["south"]))
        edges.append((vid[n, i], vid[n, i + 1])); etags.append(int(side_tags["north"]))
        edges.append((vid[i, 0], vid[i + 1, 0])); etags.append(int(side_tags["west"]))
        edges.append((vid[i, n], vid[i + 1, n])); etags.append(int(side_tags["east"]))
    clen = char_length if char_length is not None else _default_char_length(
        verts, np.asarray(edges), np.asarray(etags))
    return Mesh(verts, tris, np.asarray(edges), np.asarray(etags), clen,
                exact_area=width * height)


# ---------------------------------------------------------------------------
# Taylor-Hood (P2/P1) spaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TaylorHoodSpace:
    """Degree-of-freedom maps for the P2 velocity / P1 pressure pair.

    P2 nodes are the mesh vertices followed by one midpoint per geometric
    edge. Velocity dofs interleave components: node q owns dofs (2q, 2q+1).
    Pressure dofs coincide with vertex indices.
    """

    mesh: Mesh
    edges: np.ndarray          # (n_edges, 2) sorted vertex pairs, lexicographic order
    p2_coords: np.ndarray      # (n_p2, 2) vertex+midpoint coordinates
    cell_p2: np.ndarray        # (m, 6) local P2 nodes: v0 v1 v2, m(v1v2) m(v2v0) m(v0v1)
    dirichlet_nodes_by_tag: dict
    boundary_p2_nodes: np.ndarray

    @property
    def n_p2(self):
        return self.p2_coords.shape[0]

    @property
    def n_velocity_dofs(self):
        return 2 * self.n_p2

    @property
    def n_pressure_dofs(self):
        return self.mesh.n_vertices

    @property
    def cell_p1(self):
        return self.mesh.triangles

    def velocity_nodal(self, u):
        """View a velocity coefficient vector as (n_p2, 2) nodal vectors."""
        return np.asarray(u).reshape(self.n_p2, 2)

    def nodes_with_tags(self, tags):
        """Sorted P2 node ids lying on boundary edges with any of `tags`."""
        out = set()
        for t in tags:
            out |= self.dirichlet_nodes_by_tag.get(int(t), set())
        return np.asarray(sorted(out), dtype=np.int64)


def build_taylor_hood(mesh):
    """Construct the Taylor-Hood dof maps for a mesh."""
    tris = mesh.triangles
    local = np.concatenate([tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]]])
    local = np.sort(local, axis=1)
    uniq, inverse = np.unique(local, axis=0, return_inverse=True)
    n_v = mesh.n_vertices
    cell_mid = n_v + inverse.reshape(3, -1).T
    cell_p2 = np.hstack([tris, cell_mid])
    midpoints = 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])
    p2_coords = np.vstack([mesh.vertices, midpoints])

    edge_lookup = {(int(a), int(b)): n_v + k for k, (a, b) in enumerate(uniq.tolist())}
    by_tag = {int(t): set() for t in BoundaryTag}
    all_bnodes = set()
    for (a, b), t in zip(mesh.boundary_edges.tolist(), mesh.boundary_tags.tolist()):
        m = edge_lookup[(min(a, b), max(a, b))]
        by_tag[int(t)] |= {a, b, m}
        all_bnodes |= {a, b, m}
    return TaylorHoodSpace(
        mesh=mesh,
        edges=uniq,
        p2_coords=p2_coords,
        cell_p2=cell_p2,
        dirichlet_nodes_by_tag=by_tag,
        boundary_p2_nodes=np.asarray(sorted(all_bnodes), dtype=np.int64),
    )
