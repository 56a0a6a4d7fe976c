"""Sensor-pose hypergraph, spanning-tree initialization and LM refinement.

Each edge measures the pose of ``to_id`` expressed in the frame of
``from_id``. Its residual is

    e_ij = log(M_ij^-1 @ T_i^-1 @ T_j)

and the objective is ``F = sum_ij e_ij^T Omega_ij e_ij``. Node poses are
updated on the right, ``T <- T @ exp(delta)``.
"""

from __future__ import annotations

import dataclasses
import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import lie
from .errors import ConnectivityError, InvalidArgumentError, NumericalError
from .lie import Pose

logger = logging.getLogger(__name__)

EDGE_KINDS = ("stereo", "handeye", "lidar_camera", "lidar_lidar", "tracking")


@dataclass(frozen=True)
class SensorNode:
    id: int
    pose: Pose = field(default_factory=Pose.identity)
    label: str = ""
    fixed: bool = False


@dataclass(frozen=True, eq=False)
class CalibEdge:
    """Pairwise calibration: ``measurement`` is frame ``to_id`` seen from frame ``from_id``."""

    from_id: int
    to_id: int
    measurement: Pose
    information: np.ndarray = field(default_factory=lambda: np.eye(6))
    kind: str | None = None

    def __post_init__(self):
        if self.from_id == self.to_id:
            raise InvalidArgumentError(f"edge connects node {self.from_id} to itself")
        info = np.array(self.information, dtype=float)
        if info.shape != (6, 6) or not np.all(np.isfinite(info)):
            raise InvalidArgumentError("information must be a finite 6x6 matrix")
        scale = max(1.0, float(np.abs(info).max()))
        if np.abs(info - info.T).max() > 1e-9 * scale:
            raise InvalidArgumentError("information matrix is not symmetric")
        if np.linalg.eigvalsh(0.5 * (info + info.T)).min() < -1e-9 * scale:
            raise InvalidArgumentError("information matrix is not positive semidefinite")
        if self.kind is not None and self.kind not in EDGE_KINDS:
            raise InvalidArgumentError(f"unknown edge kind {self.kind!r}")
        info.setflags(write=False)
        object.__setattr__(self, "information", info)


class CalibGraph:
    """Nodes keyed by id plus an ordered edge list.

    The builder methods mutate in place; every algorithm in this module
    returns a new graph and leaves its input untouched.
    """

    def __init__(self, nodes=(), edges=()):
        self.nodes: dict[int, SensorNode] = {}
        self.edges: list[CalibEdge] = []
        for n in nodes:
            self.add_node(n)
        for e in edges:
            self.add_edge(e)

    def add_node(self, node_or_id, pose=None, *, label="", fixed=False):
        if isinstance(node_or_id, SensorNode):
            node = node_or_id
        else:
            node = SensorNode(int(node_or_id), pose if pose is not None else Pose.identity(), label, fixed)
        if node.id in self.nodes:
            raise InvalidArgumentError(f"duplicate node id {node.id}")
        self.nodes[node.id] = node
        return node

    def add_edge(self, edge_or_from, to_id=None, measurement=None, information=None, kind=None):
        if isinstance(edge_or_from, CalibEdge):
            edge = edge_or_from
        else:
            edge = CalibEdge(
                int(edge_or_from),
                int(to_id),
                measurement,
                np.eye(6) if information is None else information,
                kind,
            )
        for nid in (edge.from_id, edge.to_id):
            if nid not in self.nodes:
                raise InvalidArgumentError(f"edge references unknown node {nid}")
        self.edges.append(edge)
        return edge

    def copy(self):
        g = CalibGraph()
        g.nodes = dict(self.nodes)
        g.edges = list(self.edges)
        return g

    def pose(self, node_id):
        return self.nodes[node_id].pose

    def poses(self):
        return {i: n.pose for i, n in self.nodes.items()}

    def with_poses(self, poses):
        g = self.copy()
        for i, p in poses.items():
            g.nodes[i] = dataclasses.replace(g.nodes[i], pose=p)
        return g

    def with_fixed(self, node_ids):
        """Copy with exactly ``node_ids`` marked as gauge anchors."""
        keep = set(node_ids)
        g = self.copy()
        for i, n in g.nodes.items():
            g.nodes[i] = dataclasses.replace(n, fixed=i in keep)
        return g

    @property
    def fixed_ids(self):
        return sorted(i for i, n in self.nodes.items() if n.fixed)

    @property
    def free_ids(self):
        return sorted(i for i, n in self.nodes.items() if not n.fixed)

    def components(self):
        """Connected components as sorted id lists, ordered by smallest id."""
        adj = {i: set() for i in self.nodes}
        for e in self.edges:
            adj[e.from_id].add(e.to_id)
            adj[e.to_id].add(e.from_id)
        seen = set()
        out = []
        for start in sorted(adj):
            if start in seen:
                continue
            comp = []
            queue = deque([start])
            seen.add(start)
            while queue:
                u = queue.popleft()
                comp.append(u)
                for v in adj[u]:
                    if v not in seen:
                        seen.add(v)
                        queue.append(v)
            out.append(sorted(comp))
        return out

    def check_connected(self):
        comps = self.components()
        if len(comps) > 1:
            raise ConnectivityError(comps)

    def __len__(self):
        return len(self.nodes)

    def __repr__(self):
        return f"CalibGraph({len(self.nodes)} nodes, {len(self.edges)} edges, fixed={self.fixed_ids})"


@dataclass
class SolverOptions:
    max_iterations: int = 100
    lambda0: float = 1e-4
    relative_cost_tolerance: float = 1e-10
    step_tolerance: float = 1e-12
    max_lambda: float = 1e16
    # "analytic" (exact inverse right Jacobian), "approx" (I + ad(e)/2), "numeric"
    jacobian: str = "analytic"

    def __post_init__(self):
        if self.jacobian not in ("analytic", "approx", "numeric"):
            raise InvalidArgumentError(f"unknown jacobian mode {self.jacobian!r}")
        if self.max_iterations < 0 or self.lambda0 <= 0:
            raise InvalidArgumentError("max_iterations must be >= 0 and lambda0 > 0")


@dataclass
class SolveReport:
    initial_cost: float
    final_cost: float
    iterations: int
    converged: bool
    cost_trace: list = field(default_factory=list)
    stop_reason: str = ""


def _residual(measurement, pose_i, pose_j):
    return lie.log(measurement.inverse() @ pose_i.inverse() @ pose_j)


def edge_error(graph, edge):
    """Residual twist ``log(M^-1 T_i^-1 T_j)`` of one edge."""
    return _residual(edge.measurement, graph.pose(edge.from_id), graph.pose(edge.to_id))


def edge_errors(graph):
    return np.array([edge_error(graph, e) for e in graph.edges]).reshape(-1, 6)


def total_cost(graph):
    """Information-weighted sum of squared edge residuals."""
    cost = 0.0
    for edge in graph.edges:
        e = edge_error(graph, edge)
        cost += float(e @ edge.information @ e)
    return cost


def edge_jacobians(graph, edge, mode="analytic", step=1e-6):
    """Residual and its derivatives w.r.t. right perturbations of both endpoints.

    Returns ``(e, J_i, J_j)``.
    """
    pose_i = graph.pose(edge.from_id)
    pose_j = graph.pose(edge.to_id)
    e = _residual(edge.measurement, pose_i, pose_j)
    if mode == "numeric":
        j_i = np.empty((6, 6))
        j_j = np.empty((6, 6))
        for k in range(6):
            d = np.zeros(6)
            d[k] = step
            plus, minus = lie.exp(d), lie.exp(-d)
            j_i[:, k] = (_residual(edge.measurement, pose_i @ plus, pose_j)
                         - _residual(edge.measurement, pose_i @ minus, pose_j)) / (2 * step)
            j_j[:, k] = (_residual(edge.measurement, pose_i, pose_j @ plus)
                         - _residual(edge.measurement, pose_i, pose_j @ minus)) / (2 * step)
        return e, j_i, j_j
    if mode == "approx":
        jr_inv = np.eye(6) + 0.5 * lie.ad(e)
    else:
        jr_inv = lie.se3_right_jacobian_inv(e)
    j_j = jr_inv
    j_i = -jr_inv @ lie.adjoint(pose_j.inverse() @ pose_i)
    return e, j_i, j_j


def linearize(graph, mode="analytic"):
    """Gauss-Newton system over the free nodes.

    Returns ``(H, b)`` with ``H = sum J^T Omega J`` and ``b = sum J^T Omega e``.
    Free nodes occupy consecutive 6-blocks in ascending id order.
    """
    index = {nid: k for k, nid in enumerate(graph.free_ids)}
    n = 6 * len(index)
    h = np.zeros((n, n))
    b = np.zeros(n)
    for edge in graph.edges:
        ki = index.get(edge.from_id)
        kj = index.get(edge.to_id)
        if ki is None and kj is None:
            continue
        e, j_i, j_j = edge_jacobians(graph, edge, mode)
        omega = edge.information
        blocks = []
        if ki is not None:
            blocks.append((6 * ki, j_i))
        if kj is not None:
            blocks.append((6 * kj, j_j))
        for r, jr in blocks:
            jt_omega = jr.T @ omega
            b[r:r + 6] += jt_omega @ e
            for c, jc in blocks:
                h[r:r + 6, c:c + 6] += jt_omega @ jc
    return h, b


def _retract(graph, delta):
    poses = {}
    for k, nid in enumerate(graph.free_ids):
        poses[nid] = graph.pose(nid) @ lie.exp(delta[6 * k:6 * k + 6])
    return graph.with_poses(poses)


def optimize(graph, options=None):
    """Levenberg-Marquardt refinement of all free node poses.

    Returns ``(optimized_graph, SolveReport)``. The input graph is not modified.
    """
    opts = options or SolverOptions()
    graph.check_connected()
    if not graph.fixed_ids:
        raise InvalidArgumentError("no fixed node: mark at least one node as gauge anchor")

    cost = total_cost(graph)
    report = SolveReport(initial_cost=cost, final_cost=cost, iterations=0, converged=False, cost_trace=[cost])
    if not graph.free_ids:
        report.converged = True
        report.stop_reason = "no free nodes"
        return graph, report
    if cost == 0.0:
        report.converged = True
        report.stop_reason = "zero cost"
        return graph, report

    lam = opts.lambda0
    current = graph
    need_linearize = True
    h = b = None
    for it in range(1, opts.max_iterations + 1):
        if need_linearize:
            h, b = linearize(current, opts.jacobian)
        damped = h + lam * np.diag(np.diag(h))
        try:
            factor = scipy.linalg.cho_factor(damped)
            delta = -scipy.linalg.cho_solve(factor, b)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalError(f"damped system is singular at iteration {it}: {exc}") from exc
        if not np.all(np.isfinite(delta)):
            raise NumericalError(f"non-finite step at iteration {it}")

        candidate = _retract(current, delta)
        new_cost = total_cost(candidate)
        step_norm = float(np.abs(delta).max())
        decrease = cost - new_cost
        report.iterations = it
        if new_cost <= cost:
            current = candidate
            cost = new_cost
            lam = max(lam / 10.0, 1e-20)
            need_linearize = True
        else:
            lam *= 10.0
            need_linearize = False
        report.cost_trace.append(cost)
        logger.debug("iter %d cost %.6e step %.3e lambda %.1e", it, cost, step_norm, lam)

        if cost == 0.0:
            report.converged, report.stop_reason = True, "zero cost"
            break
        if step_norm < opts.step_tolerance:
            report.converged, report.stop_reason = True, "step below tolerance"
            break
        if abs(decrease) < opts.relative_cost_tolerance * cost:
            report.converged, report.stop_reason = True, "relative cost change below tolerance"
            break
        if lam > opts.max_lambda:
            report.stop_reason = "damping exceeded max_lambda"
            break
    else:
        report.stop_reason = "max_iterations reached"

    report.final_cost = cost
    return current, report


def _information_weight(edge):
    return float(np.trace(edge.information))


def spanning_tree(graph):
    """Maximum-information spanning tree as a list of edge indices.

    Edge weight is ``trace(Omega)``; ties go to the smallest ``(from_id, to_id)``,
    then to the earlier edge.
    """
    graph.check_connected()
    order = sorted(
        range(len(graph.edges)),
        key=lambda k: (-_information_weight(graph.edges[k]), graph.edges[k].from_id, graph.edges[k].to_id, k),
    )
    parent = {i: i for i in graph.nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree = []
    for k in order:
        e = graph.edges[k]
        ra, rb = find(e.from_id), find(e.to_id)
        if ra != rb:
            parent[ra] = rb
            tree.append(k)
            if len(tree) == len(graph.nodes) - 1:
                break
    return sorted(tree)


def spanning_tree_init(graph, root_id=None):
    """Initial poses by chaining measurements outward from ``root_id``.

    The root (default: lowest id) is set to identity and marked fixed.
    """
    if root_id is None:
        root_id = min(graph.nodes)
    if root_id not in graph.nodes:
        raise InvalidArgumentError(f"root node {root_id} does not exist")
    tree = spanning_tree(graph)
    adj = {i: [] for i in graph.nodes}
    for k in tree:
        e = graph.edges[k]
        adj[e.from_id].append((e.to_id, e.measurement))
        adj[e.to_id].append((e.from_id, e.measurement.inverse()))
    poses = {root_id: Pose.identity()}
    queue = deque([root_id])
    while queue:
        u = queue.popleft()
        for v, step in adj[u]:
            if v not in poses:
                poses[v] = poses[u] @ step
                queue.append(v)
    out = graph.with_poses(poses)
    out.nodes[root_id] = dataclasses.replace(out.nodes[root_id], fixed=True)
    return out


def compose_along_path(graph, path):
    """Chain edge measurements along ``path``, inverting edges traversed backwards.

    Between two nodes joined by parallel edges, the first edge in graph order is used.
    """
    path = list(path)
    if not path:
        raise InvalidArgumentError("empty path")
    result = Pose.identity()
    for a, b in zip(path[:-1], path[1:]):
        for e in graph.edges:
            if e.from_id == a and e.to_id == b:
                result = result @ e.measurement
                break
            if e.from_id == b and e.to_id == a:
                result = result @ e.measurement.inverse()
                break
        else:
            raise InvalidArgumentError(f"no edge between nodes {a} and {b}")
    return result


def align_to(poses, reference, anchor_id):
    """Left-multiply ``poses`` so that ``anchor_id`` coincides with ``reference[anchor_id]``."""
    g = reference[anchor_id] @ poses[anchor_id].inverse()
    return {i: g @ p for i, p in poses.items()}
