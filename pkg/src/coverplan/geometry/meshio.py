"""Readers and writers for STL (binary/ASCII), OBJ and PLY (ASCII/binary)."""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from coverplan.errors import InvalidInputError, MeshFormatError
from coverplan.geometry.mesh import TriangleMesh

FORMATS = ("stl-binary", "stl-ascii", "obj", "ply")

_STL_HEADER = 80
_STL_FACET = 50
_STL_DTYPE = np.dtype(
    [("normal", "<f4", (3,)), ("v", "<f4", (3, 3)), ("attr", "<u2")]
)


def load_mesh(path, format: str | None = None) -> TriangleMesh:
    """Read a triangle mesh from ``path``.

    Args:
        path: mesh file.
        format: one of ``FORMATS`` (``"stl"`` sniffs binary vs ASCII). Inferred
            from the extension when omitted.

    Raises:
        MeshFormatError: the file does not parse as the declared format; the
            message names the byte offset (binary) or line number (text).
        InvalidInputError: the file parses but holds no triangles.
        FileNotFoundError: ``path`` does not exist.
    """
    path = Path(path)
    data = path.read_bytes()
    fmt = (format or _infer_format(path)).lower()
    if fmt == "stl":
        fmt = "stl-binary" if _looks_binary_stl(data) else "stl-ascii"
    if fmt == "stl-binary":
        vertices, triangles = _read_stl_binary(data)
    elif fmt == "stl-ascii":
        vertices, triangles = _read_stl_ascii(data)
    elif fmt == "obj":
        vertices, triangles = _read_obj(data)
    elif fmt == "ply":
        vertices, triangles = _read_ply(data)
    else:
        raise InvalidInputError(f"unsupported mesh format {fmt!r}; expected one of {FORMATS}")
    if len(triangles) == 0:
        raise InvalidInputError(f"{path} contains no triangles")
    return TriangleMesh.from_arrays(vertices, triangles)


def _infer_format(path: Path) -> str:
    ext = path.suffix.lower()
    if ext == ".stl":
        return "stl"
    if ext in (".obj", ".ply"):
        return ext[1:]
    raise InvalidInputError(f"cannot infer mesh format from extension {ext!r}")


def _looks_binary_stl(data: bytes) -> bool:
    if len(data) >= _STL_HEADER + 4:
        (n,) = struct.unpack_from("<I", data, _STL_HEADER)
        if len(data) == _STL_HEADER + 4 + n * _STL_FACET:
            return True
    return not data.lstrip()[:5].lower() == b"solid"


def _index_soup(corners: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge bitwise-identical corners of an (n, 3, 3) triangle soup."""
    flat = corners.reshape(-1, 3)
    vertices, inverse = np.unique(flat, axis=0, return_inverse=True)
    return vertices, inverse.reshape(-1, 3)


def _read_stl_binary(data: bytes):
    if len(data) < _STL_HEADER + 4:
        raise MeshFormatError("truncated STL header", location=len(data), unit="byte offset")
    (n,) = struct.unpack_from("<I", data, _STL_HEADER)
    need = _STL_HEADER + 4 + n * _STL_FACET
    if len(data) < need:
        complete = (len(data) - _STL_HEADER - 4) // _STL_FACET
        offset = _STL_HEADER + 4 + complete * _STL_FACET
        raise MeshFormatError(
            f"truncated STL: header declares {n} facets, facet {complete} incomplete",
            location=offset,
            unit="byte offset",
        )
    facets = np.frombuffer(data, dtype=_STL_DTYPE, count=n, offset=_STL_HEADER + 4)
    corners = facets["v"].astype(np.float64)
    if n == 0:
        return np.empty((0, 3)), np.empty((0, 3), dtype=np.int64)
    return _index_soup(corners)


def _read_stl_ascii(data: bytes):
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise MeshFormatError("STL is neither valid binary nor ASCII", location=exc.start, unit="byte offset") from exc
    corners = []
    facet: list[list[float]] = []
    in_facet = False
    saw_solid = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tok = raw.split()
        if not tok:
            continue
        key = tok[0].lower()
        if key == "solid":
            saw_solid = True
        elif key == "facet":
            if in_facet:
                raise MeshFormatError("nested facet", location=lineno)
            in_facet = True
            facet = []
        elif key == "vertex":
            if not in_facet or len(tok) != 4:
                raise MeshFormatError("malformed vertex record", location=lineno)
            try:
                facet.append([float(t) for t in tok[1:]])
            except ValueError as exc:
                raise MeshFormatError(f"bad vertex coordinate: {exc}", location=lineno) from exc
        elif key == "endfacet":
            if not in_facet or len(facet) != 3:
                raise MeshFormatError("facet without exactly three vertices", location=lineno)
            corners.append(facet)
            in_facet = False
        elif key in ("outer", "endloop", "endsolid"):
            pass
        else:
            raise MeshFormatError(f"unexpected token {tok[0]!r}", location=lineno)
    if not saw_solid:
        raise MeshFormatError("missing 'solid' header", location=1)
    if in_facet:
        raise MeshFormatError("file ends inside a facet", location=len(text.splitlines()))
    if not corners:
        return np.empty((0, 3)), np.empty((0, 3), dtype=np.int64)
    return _index_soup(np.asarray(corners, dtype=np.float64))


def _read_obj(data: bytes):
    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    text = data.decode("utf-8", errors="replace")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "v":
            if len(tok) < 4:
                raise MeshFormatError("vertex needs three coordinates", location=lineno)
            try:
                vertices.append([float(t) for t in tok[1:4]])
            except ValueError as exc:
                raise MeshFormatError(f"bad vertex coordinate: {exc}", location=lineno) from exc
        elif tok[0] == "f":
            if len(tok) != 4:
                raise MeshFormatError(
                    f"only triangular faces are supported, got {len(tok) - 1} vertices", location=lineno
                )
            face = []
            for t in tok[1:]:
                try:
                    idx = int(t.split("/", 1)[0])
                except ValueError as exc:
                    raise MeshFormatError(f"bad face index {t!r}", location=lineno) from exc
                if idx < 0:
                    idx = len(vertices) + idx + 1
                if idx < 1 or idx > len(vertices):
                    raise MeshFormatError(f"face index {t} out of range", location=lineno)
                face.append(idx - 1)
            faces.append(face)
    return np.asarray(vertices, dtype=np.float64).reshape(-1, 3), np.asarray(faces, dtype=np.int64).reshape(-1, 3)


_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _read_ply(data: bytes):
    end = data.find(b"end_header")
    if not data.startswith(b"ply") or end < 0:
        raise MeshFormatError("missing PLY header", location=1)
    nl = data.find(b"\n", end)
    body_start = nl + 1 if nl >= 0 else len(data)
    header_lines = data[:end].decode("ascii", errors="replace").splitlines()
    fmt = None
    elements: list[tuple[str, int, list]] = []
    for lineno, line in enumerate(header_lines, start=1):
        tok = line.split()
        if not tok or tok[0] in ("ply", "comment", "obj_info"):
            continue
        if tok[0] == "format":
            fmt = tok[1]
        elif tok[0] == "element":
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise MeshFormatError("property before element", location=lineno)
            if tok[1] == "list":
                if tok[2] not in _PLY_TYPES or tok[3] not in _PLY_TYPES:
                    raise MeshFormatError(f"unknown list type in {line!r}", location=lineno)
                elements[-1][2].append((tok[4], "list", _PLY_TYPES[tok[2]], _PLY_TYPES[tok[3]]))
            else:
                if tok[1] not in _PLY_TYPES:
                    raise MeshFormatError(f"unknown property type {tok[1]!r}", location=lineno)
                elements[-1][2].append((tok[2], "scalar", _PLY_TYPES[tok[1]], None))
        else:
            raise MeshFormatError(f"unexpected header line {line!r}", location=lineno)
    if fmt == "ascii":
        return _read_ply_ascii(data[body_start:], elements, len(header_lines) + 1)
    if fmt in ("binary_little_endian", "binary_big_endian"):
        endian = "<" if fmt == "binary_little_endian" else ">"
        return _read_ply_binary(data, body_start, elements, endian)
    raise MeshFormatError(f"unsupported PLY format {fmt!r}", location=1)


def _ply_collect(name, props, rows, vertices, faces):
    names = [p[0] for p in props]
    if name == "vertex":
        try:
            ix = [names.index(c) for c in ("x", "y", "z")]
        except ValueError:
            raise MeshFormatError("vertex element lacks x/y/z", location=1) from None
        vertices.extend([[float(r[i]) for i in ix] for r in rows])
    elif name == "face":
        key = "vertex_indices" if "vertex_indices" in names else "vertex_index"
        if key not in names:
            raise MeshFormatError("face element lacks vertex_indices", location=1)
        ix = names.index(key)
        for r in rows:
            idx = r[ix]
            if len(idx) != 3:
                raise MeshFormatError(f"only triangular faces are supported, got {len(idx)}", location=1)
            faces.append([int(i) for i in idx])


def _read_ply_ascii(body: bytes, elements, first_line: int):
    lines = body.decode("ascii", errors="replace").splitlines()
    pos = 0
    vertices: list = []
    faces: list = []
    for name, n, props in elements:
        rows = []
        for _ in range(n):
            while pos < len(lines) and not lines[pos].strip():
                pos += 1
            if pos >= len(lines):
                raise MeshFormatError(f"unexpected end of data in element {name!r}", location=first_line + pos)
            tok = lines[pos].split()
            row = []
            k = 0
            try:
                for _pname, kind, t_count, _t_item in props:
                    if kind == "list":
                        cnt = int(tok[k])
                        row.append(tok[k + 1 : k + 1 + cnt])
                        if len(row[-1]) != cnt:
                            raise IndexError
                        k += 1 + cnt
                    else:
                        row.append(tok[k])
                        k += 1
            except (IndexError, ValueError):
                raise MeshFormatError(f"malformed {name!r} record", location=first_line + pos) from None
            rows.append(row)
            pos += 1
        _ply_collect(name, props, rows, vertices, faces)
    return _ply_arrays(vertices, faces)


def _read_ply_binary(data: bytes, offset: int, elements, endian: str):
    vertices: list = []
    faces: list = []
    for name, n, props in elements:
        if all(kind == "scalar" for _, kind, _, _ in props):
            dt = np.dtype([(p[0], endian + p[2]) for p in props])
            if offset + n * dt.itemsize > len(data):
                raise MeshFormatError(f"truncated PLY element {name!r}", location=offset, unit="byte offset")
            arr = np.frombuffer(data, dtype=dt, count=n, offset=offset)
            offset += n * dt.itemsize
            _ply_collect(name, props, [list(r) for r in arr.tolist()], vertices, faces)
            continue
        rows = []
        for _ in range(n):
            row = []
            for _pname, kind, t_count, t_item in props:
                fmt_c = endian + t_count
                if kind == "list":
                    size_c = np.dtype(t_count).itemsize
                    if offset + size_c > len(data):
                        raise MeshFormatError(f"truncated PLY element {name!r}", location=offset, unit="byte offset")
                    cnt = int(np.frombuffer(data, dtype=fmt_c, count=1, offset=offset)[0])
                    offset += size_c
                    size_i = np.dtype(t_item).itemsize
                    if offset + cnt * size_i > len(data):
                        raise MeshFormatError(f"truncated PLY element {name!r}", location=offset, unit="byte offset")
                    row.append(np.frombuffer(data, dtype=endian + t_item, count=cnt, offset=offset).tolist())
                    offset += cnt * size_i
                else:
                    size_c = np.dtype(t_count).itemsize
                    if offset + size_c > len(data):
                        raise MeshFormatError(f"truncated PLY element {name!r}", location=offset, unit="byte offset")
                    row.append(np.frombuffer(data, dtype=fmt_c, count=1, offset=offset)[0].item())
                    offset += size_c
            rows.append(row)
        _ply_collect(name, props, rows, vertices, faces)
    return _ply_arrays(vertices, faces)


def _ply_arrays(vertices, faces):
    v = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    f = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if len(f) and (f.min() < 0 or f.max() >= len(v)):
        raise MeshFormatError("face index out of range", location=1)
    return v, f


# ---------------------------------------------------------------------------
# writers


def _atomic_write(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def write_mesh(path, mesh: TriangleMesh, format: str | None = None, face_colors=None) -> Path:
    """Write ``mesh`` to ``path``.

    ``face_colors`` (n_triangles x 3, uint8) is only supported for PLY, where it
    is stored as per-face ``red``/``green``/``blue`` properties.
    """
    path = Path(path)
    fmt = (format or _infer_format(path)).lower()
    if fmt == "stl":
        fmt = "stl-binary"
    if face_colors is not None and fmt != "ply":
        raise InvalidInputError("face colors are only supported for PLY output")
    if fmt == "stl-binary":
        payload = _stl_binary_bytes(mesh)
    elif fmt == "stl-ascii":
        payload = _stl_ascii_bytes(mesh)
    elif fmt == "obj":
        payload = _obj_bytes(mesh)
    elif fmt == "ply":
        payload = _ply_bytes(mesh, face_colors)
    else:
        raise InvalidInputError(f"unsupported mesh format {fmt!r}")
    path.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(path, payload)
    return path


def _stl_binary_bytes(mesh: TriangleMesh) -> bytes:
    out = np.zeros(mesh.n_triangles, dtype=_STL_DTYPE)
    out["normal"] = mesh.normals
    out["v"] = mesh.vertices[mesh.triangles]
    header = b"coverplan binary STL".ljust(_STL_HEADER, b" ")
    return header + struct.pack("<I", mesh.n_triangles) + out.tobytes()


def _stl_ascii_bytes(mesh: TriangleMesh) -> bytes:
    lines = ["solid coverplan"]
    corners = mesh.vertices[mesh.triangles]
    for n, tri in zip(mesh.normals.tolist(), corners.tolist()):
        lines.append(f"  facet normal {n[0]!r} {n[1]!r} {n[2]!r}")
        lines.append("    outer loop")
        for v in tri:
            lines.append(f"      vertex {v[0]!r} {v[1]!r} {v[2]!r}")
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append("endsolid coverplan")
    return ("\n".join(lines) + "\n").encode("ascii")


def _obj_bytes(mesh: TriangleMesh) -> bytes:
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles.tolist()]
    return ("\n".join(lines) + "\n").encode("ascii")


def _ply_bytes(mesh: TriangleMesh, face_colors) -> bytes:
    header = [
        "ply",
        "format ascii 1.0",
        "comment written by coverplan",
        f"element vertex {len(mesh.vertices)}",
        "property double x",
        "property double y",
        "property double z",
        f"element face {mesh.n_triangles}",
        "property list uchar int vertex_indices",
    ]
    if face_colors is not None:
        face_colors = np.asarray(face_colors, dtype=np.uint8).reshape(mesh.n_triangles, 3)
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append("end_header")
    body = [f"{x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    tris = mesh.triangles.tolist()
    if face_colors is None:
        body += [f"3 {a} {b} {c}" for a, b, c in tris]
    else:
        body += [f"3 {a} {b} {c} {r} {g} {bl}" for (a, b, c), (r, g, bl) in zip(tris, face_colors.tolist())]
    return ("\n".join(header + body) + "\n").encode("ascii")


def read_ply_face_colors(path) -> np.ndarray:
    """Per-face RGB colors of an ASCII PLY written by :func:`write_mesh`."""
    text = Path(path).read_text(encoding="ascii")
    header, _, body = text.partition("end_header\n")
    n_vert = n_face = 0
    for line in header.splitlines():
        tok = line.split()
        if tok[:2] == ["element", "vertex"]:
            n_vert = int(tok[2])
        elif tok[:2] == ["element", "face"]:
            n_face = int(tok[2])
    rows = body.splitlines()[n_vert : n_vert + n_face]
    return np.array([[int(t) for t in r.split()[-3:]] for r in rows], dtype=np.uint8).reshape(-1, 3)
