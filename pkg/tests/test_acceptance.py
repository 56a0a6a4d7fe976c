"""End-to-end acceptance checks, one test per criterion.

Run ``pytest tests/test_acceptance.py -v``; a PASS/FAIL line per criterion
is printed in the "acceptance criteria" section of the summary.
"""

import math
import time

import numpy as np
import pytest

from calibgraph import fileio, handeye, lie, resample, synth, validate
from calibgraph import graph as G
from calibgraph.errors import ParseError
from calibgraph.graph import CalibGraph
from calibgraph.lie import Pose, Rotation
from calibgraph.synth import RigSpec
from calibgraph.validate import PointCorrespondences


def random_connected_edges(rng, n):
    # random tree plus a few extra chords
    edges = {(int(rng.integers(0, i)), i) for i in range(1, n)}
    for _ in range(int(rng.integers(0, n + 1))):
        i, j = sorted(int(v) for v in rng.choice(n, 2, replace=False))
        edges.add((i, j))
    return sorted(edges)


def test_01_synthetic_noise_reduction():
    t0 = time.perf_counter()
    results = synth.run_trials(RigSpec(node_count=4, topology="complete", noise_sigma=0.05, trials=300, seed=7))
    elapsed = time.perf_counter() - t0
    s = synth.summarize(results)
    print(f"\n[1] 300 trials in {elapsed:.2f} s; fraction improved {s['fraction_improved']:.4f}")
    for part in ("translation", "rotation"):
        inj = s[f"injected_{part}_sq_error"]["mean"]
        opt = s[f"optimized_{part}_sq_error"]["mean"]
        print(f"[1] {part}: mean injected {inj:.5f}  mean optimized {opt:.5f}")
        assert opt < inj
    assert s["failed"] == 0
    assert s["fraction_improved"] > 0.9
    assert elapsed < 10.0


def test_02_optimization_never_increases_error():
    rng = np.random.default_rng(202)
    for k in range(30):
        n = int(rng.integers(3, 9))
        scale = float(rng.uniform(0.5, 50))
        spec = RigSpec(n, random_connected_edges(rng, n), noise_sigma=float(rng.uniform(0.005, 0.08)))
        _, g = synth.generate_rig(spec, rng)
        # every edge weighted by the same multiple of identity
        g.edges[:] = [G.CalibEdge(e.from_id, e.to_id, e.measurement, scale * np.eye(6)) for e in g.edges]
        init = G.spanning_tree_init(g, 0)
        opt, rep = G.optimize(init)
        assert rep.converged
        assert validate.global_error(opt) <= validate.global_error(init)
        assert rep.final_cost <= rep.initial_cost
        # arbitrary SPD information: only the weighted cost is guaranteed to drop
        a = rng.standard_normal((6, 6))
        info = a @ a.T + np.eye(6)
        g.edges[:] = [G.CalibEdge(e.from_id, e.to_id, e.measurement, info) for e in g.edges]
        opt, rep = G.optimize(G.spanning_tree_init(g, 0))
        assert G.total_cost(opt) <= G.total_cost(G.spanning_tree_init(g, 0))


def test_03_handeye_exact_recovery():
    rng = np.random.default_rng(303)
    worst = 0.0
    slowest = 0.0
    for _ in range(20):
        x = synth.random_pose(rng)
        pairs = synth.generate_motion_pairs(x, 10, rng)
        t0 = time.perf_counter()
        res = handeye.solve(pairs)
        slowest = max(slowest, time.perf_counter() - t0)
        ang, dist = lie.pose_distance(res.x, x)
        worst = max(worst, ang, dist)
        assert ang < 1e-9 and dist < 1e-9
    print(f"\n[3] worst error {worst:.2e}; slowest solve {slowest * 1e3:.2f} ms")
    assert slowest < 0.1


def test_04_handeye_noise_robustness():
    rot, trans = [], []
    for seed in range(50):
        rng = np.random.default_rng(seed)
        x = synth.random_pose(rng)
        pairs = synth.generate_motion_pairs(x, 20, rng, noise=0.005)
        ang, dist = lie.pose_distance(handeye.solve(pairs).x, x)
        rot.append(ang)
        trans.append(dist)
    print(f"\n[4] median error {np.median(rot):.4f} rad / {np.median(trans):.4f} m")
    assert np.median(rot) < 0.01
    assert np.median(trans) < 0.02


def test_05_zero_noise_graph_recovery():
    rng = np.random.default_rng(505)
    most_iterations = 0
    for trial in range(40):
        n = int(rng.integers(2, 21))
        truth = {i: synth.random_pose(rng) for i in range(n)}
        g = CalibGraph()
        for i in range(n):
            start = truth[i]
            if i:
                xi = rng.standard_normal(6)
                start = truth[i] @ lie.exp(0.1 * rng.uniform() * xi / np.linalg.norm(xi))
            g.add_node(i, start, fixed=(i == 0))
        for i, j in random_connected_edges(rng, n):
            g.add_edge(i, j, truth[i].inverse() @ truth[j])
        opt, rep = G.optimize(g)
        most_iterations = max(most_iterations, rep.iterations)
        assert rep.final_cost < 1e-18
        assert rep.iterations <= 15
        aligned = G.align_to(opt.poses(), truth, 0)
        for i in range(n):
            np.testing.assert_allclose(aligned[i].matrix, truth[i].matrix, atol=1e-8)
    print(f"\n[5] max LM iterations over 40 graphs: {most_iterations}")


def test_06_jacobians_match_finite_differences():
    rng = np.random.default_rng(606)
    worst = 0.0
    for _ in range(100):
        g = CalibGraph()
        g.add_node(0, synth.random_pose(rng))
        g.add_node(1, synth.random_pose(rng))
        # measurement near the current relative pose keeps the residual off the log branch cut
        rel = g.pose(0).inverse() @ g.pose(1)
        e = g.add_edge(0, 1, rel @ lie.exp(rng.uniform(-1, 1, 6)))
        _, ai, aj = G.edge_jacobians(g, e, "analytic")
        _, ni, nj = G.edge_jacobians(g, e, "numeric", step=1e-6)
        for a, n in ((ai, ni), (aj, nj)):
            worst = max(worst, np.max(np.abs(a - n)) / np.max(np.abs(n)))
    print(f"\n[6] max relative Jacobian error {worst:.2e}")
    assert worst < 1e-6


def naive_leave_one_out(samples):
    samples = sorted(samples, key=lambda p: tuple(p.to_vector7()))
    m = len(samples)
    ref = resample.tangent_mean(samples)
    rhos = [lie.log(ref.inverse() @ resample.tangent_mean(samples[:i] + samples[i + 1:])) for i in range(m)]
    mean = sum(rhos) / m
    return mean, (m - 1) / m * sum((r - mean) ** 2 for r in rhos)


def test_07_jackknife_oracle_equivalence():
    rng = np.random.default_rng(707)
    for m in range(5, 21):
        samples = synth.generate_direct_measurements(synth.random_pose(rng), m, rng, 0.03)
        est = resample.jackknife(resample.mean_pose_estimator, samples)
        mean, var = naive_leave_one_out(samples)
        np.testing.assert_array_equal(est.variance, var)
        np.testing.assert_array_equal(est.rho_hat, mean)
    p = synth.random_pose(rng)
    est = resample.jackknife(resample.mean_pose_estimator, [p] * 7)
    np.testing.assert_array_equal(est.variance, np.zeros(6))


def test_08_lie_round_trip():
    rng = np.random.default_rng(808)
    worst = 0.0
    for _ in range(10_000):
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        p = Pose(Rotation.from_rotvec(rng.uniform(0, math.pi - 1e-3) * axis), rng.uniform(-10, 10, 3))
        q = lie.exp(lie.log(p))
        worst = max(worst, float(np.max(np.abs(q.matrix - p.matrix))))
    print(f"\n[8] max |exp(log(P)) - P| = {worst:.2e}")
    assert worst < 1e-9


def test_09_metric_fixtures():
    rng = np.random.default_rng(909)
    for theta in (0.01, 0.1, 0.5, 1.0):
        t = synth.random_pose(rng)
        n1 = rng.standard_normal(3)
        n1 /= np.linalg.norm(n1)
        n2 = t.rotation.matrix.T @ n1
        u = np.cross(n1, rng.standard_normal(3))
        u /= np.linalg.norm(u)
        bad = Pose(Rotation.from_rotvec(theta * u) @ t.rotation, t.translation)
        assert abs(validate.normal_alignment(n1, n2, bad) - math.cos(theta)) < 1e-9
    for offset in (0.05, 0.2):
        t = synth.random_pose(rng)
        src = rng.uniform(-5, 5, (100, 3))
        corr = PointCorrespondences(src, lie.act(t, src))
        d = rng.standard_normal(3)
        wrong = Pose(t.rotation, t.translation + offset * d / np.linalg.norm(d))
        assert abs(validate.point_residual(corr, wrong) - offset) < 1e-12


def test_10_format_round_trip(tmp_path):
    rng = np.random.default_rng(1010)
    for k in range(10):
        _, g = synth.generate_rig(RigSpec(int(rng.integers(2, 9)), noise_sigma=float(rng.uniform(0, 0.1))), rng)
        for e in list(g.edges):
            a = rng.standard_normal((6, 6))
            g.edges[g.edges.index(e)] = G.CalibEdge(e.from_id, e.to_id, e.measurement, a @ a.T + 0.1 * np.eye(6),
                                                    kind=str(rng.choice(G.EDGE_KINDS)))
        path = tmp_path / f"g{k}.g2o"
        fileio.write_graph(path, g)
        once = fileio.read_graph(path)
        fileio.write_graph(path, once)
        twice = fileio.read_graph(path)
        for src in (g, once):
            for nid in g.nodes:
                np.testing.assert_allclose(twice.pose(nid).to_vector7(), src.pose(nid).to_vector7(), rtol=1e-15, atol=0)
            for ea, eb in zip(src.edges, twice.edges):
                np.testing.assert_allclose(eb.measurement.to_vector7(), ea.measurement.to_vector7(), rtol=1e-15, atol=0)
                np.testing.assert_allclose(eb.information, ea.information, rtol=1e-15, atol=0)
                assert ea.kind == eb.kind
    text = "VERTEX_SE3:QUAT 0 0 0 0 0 0 0 1\nVERTEX_SE3:QUAT 1 0 0 0 0 0 0 1\nEDGE_SE3:QUAT 0 1 0 0 0 0 0 0 1 1 0\n"
    with pytest.raises(ParseError) as info:
        fileio.parse_graph(text, path="bad.g2o")
    assert info.value.lineno == 3 and "bad.g2o:line 3" in str(info.value)
