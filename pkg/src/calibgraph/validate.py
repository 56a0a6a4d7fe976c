"""Calibration quality metrics."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .graph import edge_error


def normal_alignment(n1, n2, t):
    """Cosine between ``n1`` and ``n2`` carried into the first frame by ``t``.

    ``n1`` is a plane normal measured in frame 1, ``n2`` the same plane's
    normal measured in frame 2, and ``t`` the calibration (frame 2 in frame 1)
    under test. A value near 1 indicates a good rotation estimate.
    """
    n1 = np.asarray(n1, dtype=float)
    n2 = np.asarray(n2, dtype=float)
    norm1 = np.linalg.norm(n1)
    norm2 = np.linalg.norm(n2)
    if norm1 == 0.0 or norm2 == 0.0:
        raise InvalidArgumentError("plane normal has zero length")
    d = float(n1 @ t.rotation.apply(n2)) / (norm1 * norm2)
    return min(1.0, max(-1.0, d))


@dataclass(frozen=True, eq=False)
class PointCorrespondences:
    """Matched points: ``target[i]`` (frame 1) corresponds to ``source[i]`` (frame 2)."""

    source: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        source = np.atleast_2d(np.asarray(self.source, dtype=float))
        target = np.atleast_2d(np.asarray(self.target, dtype=float))
        if source.size == 0 or target.size == 0:
            raise InvalidArgumentError("no point correspondences")
        if source.shape != target.shape or source.shape[1] != 3:
            raise InvalidArgumentError(
                f"source and target must be matching (n, 3) arrays, got {source.shape} and {target.shape}")
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "target", target)

    def __len__(self):
        return len(self.source)


def point_residual(corr, t):
    """Mean Euclidean norm of ``target_i - (R source_i + t)``."""
    mapped = corr.source @ t.rotation.matrix.T + t.translation
    return float(np.mean(np.linalg.norm(corr.target - mapped, axis=1)))


def global_error(graph):
    """Unweighted mean over edges of the squared residual norm ``|e_ij|^2``."""
    if not graph.edges:
        raise InvalidArgumentError("graph has no edges")
    total = 0.0
    for edge in graph.edges:
        e = edge_error(graph, edge)
        total += float(e @ e)
    return total / len(graph.edges)


def residual_rms_by_kind(graph):
    """Translation and rotation residual RMS grouped by edge kind.

    Untagged edges are reported under ``"untagged"``.
    """
    groups = defaultdict(list)
    for edge in graph.edges:
        groups[edge.kind or "untagged"].append(edge_error(graph, edge))
    out = {}
    for kind in sorted(groups):
        e = np.array(groups[kind])
        out[kind] = {
            "edges": len(e),
            "translation_rms": float(np.sqrt(np.mean(np.sum(e[:, :3] ** 2, axis=1)))),
            "rotation_rms": float(np.sqrt(np.mean(np.sum(e[:, 3:] ** 2, axis=1)))),
        }
    return out
