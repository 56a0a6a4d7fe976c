"""Synthetic rigs, noisy pairwise measurements and the Monte-Carlo noise study.

Per trial, edge measurements are ground-truth relative poses right-perturbed
by Gaussian twists. The graph is initialized from a spanning tree, refined,
and the squared edge residuals at the optimum are compared with the squared
noise that was injected (which equals the residual at ground truth).
"""

from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import lie
from .errors import CalibError, InvalidArgumentError
from .graph import CalibGraph, SolverOptions, align_to, edge_errors, optimize, spanning_tree_init
from .handeye import MotionPair
from .lie import Pose
from .resample import DEFAULT_VARIANCE_FLOOR

logger = logging.getLogger(__name__)

RESULT_FIELDS = (
    "injected_translation_sq_error",
    "injected_rotation_sq_error",
    "optimized_translation_sq_error",
    "optimized_rotation_sq_error",
)


@dataclass
class RigSpec:
    node_count: int = 4
    topology: str | list = "complete"
    noise_sigma: tuple = (0.05,) * 6
    trials: int = 300
    seed: int = 7
    variance_floor: float = DEFAULT_VARIANCE_FLOOR

    def __post_init__(self):
        if self.node_count < 2:
            raise InvalidArgumentError("a rig needs at least two nodes")
        if self.trials < 1:
            raise InvalidArgumentError("trials must be >= 1")
        sigma = np.broadcast_to(np.asarray(self.noise_sigma, dtype=float), (6,))
        if np.any(sigma < 0) or not np.all(np.isfinite(sigma)):
            raise InvalidArgumentError("noise sigma must be finite and non-negative")
        self.noise_sigma = tuple(float(s) for s in sigma)
        if isinstance(self.topology, str):
            if self.topology not in ("complete", "chain", "ring"):
                raise InvalidArgumentError(f"unknown topology {self.topology!r}")
        else:
            self.topology = [(int(i), int(j)) for i, j in self.topology]
            for i, j in self.topology:
                for n in (i, j):
                    if not 0 <= n < self.node_count:
                        raise InvalidArgumentError(f"topology references missing node {n}")
                if i == j:
                    raise InvalidArgumentError(f"self-loop on node {i}")

    def edge_list(self):
        n = self.node_count
        if self.topology == "complete":
            return list(itertools.combinations(range(n), 2))
        if self.topology == "chain":
            return [(i, i + 1) for i in range(n - 1)]
        if self.topology == "ring":
            return [(i, (i + 1) % n) for i in range(n)] if n > 2 else [(0, 1)]
        return list(self.topology)


@dataclass
class TrialResult:
    injected_translation_sq_error: float
    injected_rotation_sq_error: float
    optimized_translation_sq_error: float = math.nan
    optimized_rotation_sq_error: float = math.nan
    # node poses vs ground truth after aligning the gauge anchor
    node_translation_sq_error: float = math.nan
    node_rotation_sq_error: float = math.nan
    iterations: int = 0
    converged: bool = False
    failure: str = ""


def random_pose(rng, box=1.0):
    return Pose(lie.random_rotation(rng), rng.uniform(-box, box, size=3))


def generate_rig(spec, rng):
    """Ground-truth poses and a noisy measurement graph.

    Nodes carry their ground-truth poses and node 0 is fixed; edge
    information is ``diag(1 / max(sigma**2, floor))``.
    """
    truth = {i: random_pose(rng) for i in range(spec.node_count)}
    sigma = np.asarray(spec.noise_sigma)
    info = np.diag(1.0 / np.maximum(sigma**2, spec.variance_floor))
    g = CalibGraph()
    for i, p in truth.items():
        g.add_node(i, p, fixed=(i == 0))
    for i, j in spec.edge_list():
        noise = lie.sample_perturbation(sigma, rng)
        g.add_edge(i, j, truth[i].inverse() @ truth[j] @ lie.exp(noise), info)
    return truth, g


def _split_sq(errors):
    return float(np.sum(errors[:, :3] ** 2)), float(np.sum(errors[:, 3:] ** 2))


def run_trial(spec, rng, solver_options=None):
    truth, g = generate_rig(spec, rng)
    inj_t, inj_r = _split_sq(edge_errors(g))
    result = TrialResult(inj_t, inj_r)
    try:
        init = spanning_tree_init(g, root_id=0)
        opt, rep = optimize(init, solver_options)
    except CalibError as exc:
        result.failure = f"{type(exc).__name__}: {exc}"
        logger.warning("trial failed: %s", result.failure)
        return result, None
    result.optimized_translation_sq_error, result.optimized_rotation_sq_error = _split_sq(edge_errors(opt))
    aligned = align_to(opt.poses(), truth, 0)
    node_t = node_r = 0.0
    for i, p in aligned.items():
        ang, dist = lie.pose_distance(p, truth[i])
        node_t += dist**2
        node_r += ang**2
    result.node_translation_sq_error = node_t
    result.node_rotation_sq_error = node_r
    result.iterations = rep.iterations
    result.converged = rep.converged
    return result, opt


def _trial_worker(args):
    spec, seed_seq, solver_options = args
    return run_trial(spec, np.random.default_rng(seed_seq), solver_options)


def run_trials(spec, solver_options=None, workers=1, keep_graphs=False):
    """Run ``spec.trials`` independent trials; deterministic for a given seed.

    Trial ``k`` draws from the ``k``-th child of ``SeedSequence(spec.seed)``,
    so results do not depend on ``workers``. With ``keep_graphs`` the
    optimized graphs are returned as a second list.
    """
    children = np.random.SeedSequence(spec.seed).spawn(spec.trials)
    jobs = [(spec, s, solver_options) for s in children]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_trial_worker, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        outcomes = [_trial_worker(job) for job in jobs]
    results = [r for r, _ in outcomes]
    if keep_graphs:
        return results, [g for _, g in outcomes]
    return results


def summarize(results):
    """Mean, population variance, min and max of every metric over successful trials."""
    results = list(results)
    if not results:
        raise InvalidArgumentError("no trial results to summarize")
    ok = [r for r in results if not r.failure]
    summary = {"trials": len(results), "failed": len(results) - len(ok)}
    names = RESULT_FIELDS + ("node_translation_sq_error", "node_rotation_sq_error")
    for name in names:
        values = np.array([getattr(r, name) for r in ok], dtype=float)
        if values.size == 0:
            summary[name] = None
            continue
        summary[name] = {
            "mean": float(values.mean()),
            "variance": float(values.var()),
            "min": float(values.min()),
            "max": float(values.max()),
        }
    if ok:
        better = sum(
            r.optimized_translation_sq_error < r.injected_translation_sq_error
            and r.optimized_rotation_sq_error < r.injected_rotation_sq_error
            for r in ok
        )
        summary["fraction_improved"] = better / len(ok)
    return summary


def results_to_csv(results, fh=None):
    """Write one row per trial; returns the text when ``fh`` is None."""
    out = fh if fh is not None else io.StringIO()
    names = [f.name for f in dataclasses.fields(TrialResult)]
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["trial"] + names)
    for k, r in enumerate(results):
        row = [k]
        for name in names:
            v = getattr(r, name)
            row.append(repr(v) if isinstance(v, float) else v)
        writer.writerow(row)
    if fh is None:
        return out.getvalue()
    return None


def generate_motion_pairs(x, count, rng, noise=0.0, angle_range=(0.2, 1.2), box=0.5):
    """Corresponding motions with ``A = X B X^-1``, optionally noisy.

    Hand motions ``B`` rotate about uniformly random axes; ``noise``
    (scalar or 6-vector std-dev) right-perturbs both ``A`` and ``B``.
    """
    pairs = []
    for _ in range(count):
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(*angle_range)
        b = Pose(lie.Rotation.from_rotvec(angle * axis), rng.uniform(-box, box, size=3))
        a = x @ b @ x.inverse()
        if np.any(np.asarray(noise) > 0):
            a = a @ lie.exp(lie.sample_perturbation(noise, rng))
            b = b @ lie.exp(lie.sample_perturbation(noise, rng))
        pairs.append(MotionPair(a, b))
    return pairs


def generate_direct_measurements(true_pose, count, rng, noise):
    """Repeated noisy observations ``T @ exp(n_k)`` of a single transform."""
    return [true_pose @ lie.exp(lie.sample_perturbation(noise, rng)) for _ in range(count)]
