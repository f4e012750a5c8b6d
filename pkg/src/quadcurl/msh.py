"""Gmsh MSH 2.2 ASCII reader/writer (tetrahedra only).

Only the ``$MeshFormat``, ``$Nodes`` and ``$Elements`` sections are
interpreted. Elements of type 4 (4-node tetrahedron) are kept, all other
element types are skipped. Unknown sections are ignored.
"""
import io

import numpy as np

from .mesh import DEGENERACY_TOL, LOCAL_EDGES, Mesh

TET4 = 4


class MshError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def write_msh(mesh):
    """Serialize a mesh to MSH 2.2 ASCII with 1-based ids."""
    out = io.StringIO()
    out.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
    out.write(f"$Nodes\n{mesh.n_vertices}\n")
    for i, (x, y, z) in enumerate(mesh.vertices, start=1):
        out.write(f"{i} {x:.17g} {y:.17g} {z:.17g}\n")
    out.write("$EndNodes\n")
    out.write(f"$Elements\n{mesh.n_tets}\n")
    for i, t in enumerate(mesh.tets + 1, start=1):
        out.write(f"{i} {TET4} 2 0 1 {t[0]} {t[1]} {t[2]} {t[3]}\n")
    out.write("$EndElements\n")
    return out.getvalue()


def _sections(lines):
    """Map section name -> (first body line index, body lines)."""
    sections = {}
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        if not line.startswith("$") or line.startswith("$End"):
            raise MshError(f"expected a section header, got {line!r}", i + 1)
        name = line[1:]
        end = f"$End{name}"
        j = i + 1
        while j < len(lines) and lines[j].strip() != end:
            j += 1
        if j == len(lines):
            raise MshError(f"section ${name} is not terminated by {end}", i + 1)
        sections[name] = (i + 2, lines[i + 1:j])
        i = j + 1
    return sections


def parse_msh(text):
    """Read a tetrahedral mesh from MSH 2.2 ASCII text (or a file object).

    Vertices are renumbered 0-based in order of appearance. Negatively
    oriented tets are fixed by swapping their last two vertices; the number
    of such fixes is stored in ``Mesh.reoriented``.
    """
    if hasattr(text, "read"):
        text = text.read()
    lines = text.splitlines()
    sections = _sections(lines)
    for name in ("MeshFormat", "Nodes", "Elements"):
        if name not in sections:
            raise MshError(f"missing ${name} section")

    first, body = sections["MeshFormat"]
    fields = body[0].split() if body else []
    if len(fields) < 3:
        raise MshError("malformed $MeshFormat header", first)
    if fields[0] not in ("2.2", "2.2.0"):
        raise MshError(f"unsupported MSH version {fields[0]} (only 2.2)", first)
    if fields[1] != "0":
        raise MshError("binary MSH files are not supported", first)

    first, body = sections["Nodes"]
    try:
        count = int(body[0])
    except (IndexError, ValueError):
        raise MshError("malformed $Nodes count", first) from None
    if len(body) - 1 != count:
        raise MshError(f"$Nodes declares {count} nodes but lists {len(body) - 1}", first)
    index = {}
    coords = np.empty((count, 3))
    for k, line in enumerate(body[1:]):
        parts = line.split()
        try:
            nid = int(parts[0])
            coords[k] = [float(v) for v in parts[1:4]]
        except (IndexError, ValueError):
            raise MshError(f"malformed node entry {line!r}", first + 1 + k) from None
        if len(parts) != 4:
            raise MshError(f"malformed node entry {line!r}", first + 1 + k)
        if nid in index:
            raise MshError(f"duplicate node id {nid}", first + 1 + k)
        index[nid] = k

    first, body = sections["Elements"]
    try:
        count = int(body[0])
    except (IndexError, ValueError):
        raise MshError("malformed $Elements count", first) from None
    if len(body) - 1 != count:
        raise MshError(f"$Elements declares {count} elements but lists {len(body) - 1}", first)
    tets, tet_lines = [], []
    for k, line in enumerate(body[1:]):
        lineno = first + 1 + k
        try:
            parts = [int(v) for v in line.split()]
            etype, ntags = parts[1], parts[2]
        except (IndexError, ValueError):
            raise MshError(f"malformed element entry {line!r}", lineno) from None
        if etype != TET4:
            continue
        nodes = parts[3 + ntags:]
        if len(nodes) != 4:
            raise MshError("tetrahedron must list 4 nodes", lineno)
        try:
            tets.append([index[n] for n in nodes])
        except KeyError as exc:
            raise MshError(f"node id {exc.args[0]} referenced but not declared", lineno) from None
        tet_lines.append(lineno)

    tets = np.array(tets, dtype=np.int64).reshape(-1, 4)
    reoriented = 0
    if len(tets):
        x = coords[tets]
        vol = np.linalg.det(x[:, 1:] - x[:, :1]) / 6
        d = x[:, LOCAL_EDGES[:, 1]] - x[:, LOCAL_EDGES[:, 0]]
        scale = np.linalg.norm(d, axis=-1).max(axis=1) ** 3
        bad = np.flatnonzero(np.abs(vol) < DEGENERACY_TOL * scale)
        if len(bad):
            raise MshError("degenerate tetrahedron (zero volume)", tet_lines[bad[0]])
        neg = vol < 0
        tets[neg] = tets[neg][:, [0, 1, 3, 2]]
        reoriented = int(neg.sum())
    return Mesh(coords, tets, reoriented=reoriented)


def read_msh(path):
    with open(path) as fh:
        return parse_msh(fh.read())


def save_msh(mesh, path):
    with open(path, "w") as fh:
        fh.write(write_msh(mesh))
