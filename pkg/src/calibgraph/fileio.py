"""Text formats: graph files, motion pairs, absolute pose lists, 3-vector lists.

Graph files hold one whitespace-separated record per line::

    VERTEX_SE3:QUAT id tx ty tz qx qy qz qw
    FIX id
    EDGE_SE3:QUAT from to tx ty tz qx qy qz qw i11 i12 .. i16 i22 .. i66

with the 21 upper-triangular information entries in row-major order.
Anything after ``#`` is a comment; ``key=value`` words in a trailing
comment carry metadata (``label=`` on vertices, ``kind=`` on edges).
"""

from __future__ import annotations

import io
import os
import re

import numpy as np

from .errors import CalibError, ParseError
from .graph import CalibEdge, CalibGraph, SensorNode
from .handeye import MotionPair
from .lie import Pose

VERTEX_TAG = "VERTEX_SE3:QUAT"
EDGE_TAG = "EDGE_SE3:QUAT"
FIX_TAG = "FIX"

_UPPER = np.triu_indices(6)


def fmt(x):
    return format(float(x), ".17g")


def format_pose(p):
    return " ".join(fmt(v) for v in p.to_vector7())


def _split_comment(line):
    body, _, comment = line.partition("#")
    meta = {}
    for word in comment.split():
        key, eq, value = word.partition("=")
        if eq and key:
            meta[key] = value
    return body.split(), meta


def _floats(tokens, lineno, what):
    try:
        values = [float(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(f"bad number in {what}: {exc}", lineno) from None
    if not np.all(np.isfinite(values)):
        raise ParseError(f"non-finite number in {what}", lineno)
    return values


def _int(token, lineno, what):
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"bad {what} {token!r}", lineno) from None


def _pose(values, lineno):
    try:
        return Pose.from_vector7(values)
    except CalibError as exc:
        raise ParseError(str(exc), lineno) from None


def information_from_upper(values):
    info = np.zeros((6, 6))
    info[_UPPER] = values
    return info + np.triu(info, 1).T


def parse_graph(text, path=None):
    """Parse graph text; returns ``(graph, undeclared_ids)``.

    Nodes referenced by edges but never declared with a VERTEX record are
    created at identity and reported in ``undeclared_ids``.
    """
    vertices = {}
    labels = {}
    edges = []
    fixed = []
    try:
        for lineno, line in enumerate(text.splitlines(), 1):
            tokens, meta = _split_comment(line)
            if not tokens:
                continue
            tag = tokens[0]
            if tag == VERTEX_TAG:
                if len(tokens) != 9:
                    raise ParseError(f"{VERTEX_TAG} expects 8 fields, got {len(tokens) - 1}", lineno)
                nid = _int(tokens[1], lineno, "vertex id")
                if nid in vertices:
                    raise ParseError(f"duplicate vertex {nid}", lineno)
                vertices[nid] = _pose(_floats(tokens[2:], lineno, "vertex pose"), lineno)
                labels[nid] = meta.get("label", "")
            elif tag == EDGE_TAG:
                if len(tokens) != 31:
                    raise ParseError(f"{EDGE_TAG} expects 30 fields, got {len(tokens) - 1}", lineno)
                i = _int(tokens[1], lineno, "edge endpoint")
                j = _int(tokens[2], lineno, "edge endpoint")
                values = _floats(tokens[3:], lineno, "edge")
                meas = _pose(values[:7], lineno)
                try:
                    edge = CalibEdge(i, j, meas, information_from_upper(values[7:]), meta.get("kind"))
                except CalibError as exc:
                    raise ParseError(str(exc), lineno) from None
                edges.append((lineno, edge))
            elif tag == FIX_TAG:
                if len(tokens) != 2:
                    raise ParseError("FIX expects one node id", lineno)
                fixed.append((lineno, _int(tokens[1], lineno, "node id")))
            else:
                raise ParseError(f"unknown record type {tag!r}", lineno)
    except ParseError as exc:
        raise exc.at(path) from None

    ids = set(vertices)
    for _, e in edges:
        ids.update((e.from_id, e.to_id))
    for lineno, nid in fixed:
        if nid not in ids:
            raise ParseError(f"FIX references unknown node {nid}", lineno, path)
    fixed_ids = {nid for _, nid in fixed}
    g = CalibGraph()
    for nid in sorted(ids):
        g.add_node(SensorNode(nid, vertices.get(nid, Pose.identity()), labels.get(nid, ""), nid in fixed_ids))
    for _, e in edges:
        g.add_edge(e)
    return g, ids - set(vertices)


def format_graph(graph):
    lines = []
    for nid in sorted(graph.nodes):
        node = graph.nodes[nid]
        line = f"{VERTEX_TAG} {nid} {format_pose(node.pose)}"
        if node.label:
            line += f"  # label={node.label}"
        lines.append(line)
    for nid in graph.fixed_ids:
        lines.append(f"{FIX_TAG} {nid}")
    for e in graph.edges:
        lines.append(format_edge(e.from_id, e.to_id, e.measurement, e.information, e.kind))
    return "\n".join(lines) + "\n"


def format_edge(from_id, to_id, measurement, information, kind=None):
    """A single EDGE_SE3:QUAT record."""
    upper = " ".join(fmt(v) for v in np.asarray(information)[_UPPER])
    line = f"{EDGE_TAG} {from_id} {to_id} {format_pose(measurement)} {upper}"
    if kind:
        line += f"  # kind={kind}"
    return line


def _read_text(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write_text(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def read_graph(path):
    graph, _ = parse_graph(_read_text(path), path=os.fspath(path))
    return graph


def write_graph(path, graph):
    _write_text(path, format_graph(graph))


_PAIR_RE = re.compile(r"^\s*A:(?P<a>.*?)\bB:(?P<b>.*)$")


def parse_motion_pairs(text, path=None):
    """Lines ``A: tx ty tz qx qy qz qw  B: tx ty tz qx qy qz qw``; ``#`` comments."""
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.partition("#")[0]
        if not body.strip():
            continue
        m = _PAIR_RE.match(body)
        if not m:
            raise ParseError("expected 'A: <7 numbers>  B: <7 numbers>'", lineno, path)
        parts = []
        for key in ("a", "b"):
            tokens = m.group(key).split()
            if len(tokens) != 7:
                raise ParseError(f"pose {key.upper()} needs 7 numbers, got {len(tokens)}", lineno, path)
            try:
                parts.append(_pose(_floats(tokens, lineno, f"pose {key.upper()}"), lineno))
            except ParseError as exc:
                raise exc.at(path) from None
        pairs.append(MotionPair(*parts))
    return pairs


def format_motion_pairs(pairs):
    return "".join(f"A: {format_pose(p.a)}  B: {format_pose(p.b)}\n" for p in pairs)


def read_motion_pairs(path):
    return parse_motion_pairs(_read_text(path), path=os.fspath(path))


def write_motion_pairs(path, pairs):
    _write_text(path, format_motion_pairs(pairs))


def parse_pose_list(text, path=None):
    """Absolute pose list: a ``FRAME <name>`` header then one 7-number pose per line.

    Returns ``(frame_name, poses)``.
    """
    frame = None
    poses = []
    for lineno, line in enumerate(text.splitlines(), 1):
        tokens = line.partition("#")[0].split()
        if not tokens:
            continue
        if frame is None:
            if tokens[0] != "FRAME" or len(tokens) != 2:
                raise ParseError("first record must be 'FRAME <name>'", lineno, path)
            frame = tokens[1]
            continue
        if len(tokens) != 7:
            raise ParseError(f"pose needs 7 numbers, got {len(tokens)}", lineno, path)
        try:
            poses.append(_pose(_floats(tokens, lineno, "pose"), lineno))
        except ParseError as exc:
            raise exc.at(path) from None
    if frame is None:
        raise ParseError("missing 'FRAME <name>' header", None, path)
    return frame, poses


def format_pose_list(frame, poses):
    out = io.StringIO()
    out.write(f"FRAME {frame}\n")
    for p in poses:
        out.write(format_pose(p) + "\n")
    return out.getvalue()


def read_pose_list(path):
    return parse_pose_list(_read_text(path), path=os.fspath(path))


def parse_vectors(text, path=None):
    """One 3-vector per line; returns an ``(n, 3)`` array."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        tokens = line.partition("#")[0].replace(",", " ").split()
        if not tokens:
            continue
        if len(tokens) != 3:
            raise ParseError(f"expected 3 numbers, got {len(tokens)}", lineno, path)
        try:
            rows.append(_floats(tokens, lineno, "vector"))
        except ParseError as exc:
            raise exc.at(path) from None
    return np.array(rows, dtype=float).reshape(-1, 3)


def read_vectors(path):
    return parse_vectors(_read_text(path), path=os.fspath(path))


def write_vectors(path, vectors):
    _write_text(path, "".join(" ".join(fmt(v) for v in row) + "\n" for row in np.atleast_2d(vectors)))


def parse_pose_string(text):
    """Parse a pose given inline as 7 numbers (``tx ty tz qx qy qz qw``)."""
    tokens = text.replace(",", " ").split()
    if len(tokens) != 7:
        raise ParseError(f"pose needs 7 numbers, got {len(tokens)}")
    return _pose(_floats(tokens, None, "pose"), None)
