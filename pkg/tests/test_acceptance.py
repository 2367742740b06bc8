"""Acceptance criteria 1-9.

Run with ``pytest tests/test_acceptance.py -v`` (or execute this file).
One PASS/FAIL line per criterion is printed in the terminal summary.
"""

import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from loadproxy.ingest import ItemMeta, filter_min_responses, first_attempts
from loadproxy.irt import ResponseMatrix, calibrate_jml, likelihood_gradients, log_likelihood
from loadproxy.proxy import alignment_stats
from loadproxy.report import pipeline
from loadproxy.report.cli import main
from loadproxy.simgen import SimConfig, sample_population, simulate_responses, simulate_study

from fixtures import filter_fixture
from oracles import central_difference, grid_search_argmax

RESULTS: dict[int, tuple[bool, str]] = {}
TESTS = Path(__file__).parent


def check(n, ok, detail):
    RESULTS[n] = (bool(ok), detail)
    assert ok, detail


def pearson(a, b):
    return float(np.corrcoef(a, b)[0, 1])


def test_criterion_1_parameter_recovery():
    cfg = SimConfig(n_learners=1000, n_items=100, seed=7)
    pop = sample_population(cfg)
    m = simulate_responses(pop.thetas, pop.bank.true_b, 7, pop.learner_ids, pop.bank.item_ids)
    start = time.perf_counter()
    res = calibrate_jml(m)
    elapsed = time.perf_counter() - start
    truth = dict(zip(pop.bank.item_ids, pop.bank.true_b))
    est = np.array([p.b for p in res.items])
    true = np.array([truth[p.item_id] for p in res.items])
    est, true = est - est.mean(), true - true.mean()
    r = pearson(est, true)
    rmse = float(np.sqrt(np.mean((est - true) ** 2)))
    check(1, r >= 0.97 and rmse <= 0.25 and elapsed < 60,
          f"r={r:.4f} (>=0.97), rmse={rmse:.4f} (<=0.25), {elapsed:.2f}s (<60s), {len(est)} items")


def test_criterion_2_gradient_correctness():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(50):
        n_l, n_i = rng.integers(1, 11, size=2)
        data = rng.integers(0, 2, size=(n_l, n_i))
        m = ResponseMatrix.from_dense(data)
        theta, b = rng.normal(0, 2, n_l), rng.normal(0, 2, n_i)
        g = likelihood_gradients(m, theta, b)
        fd_t = central_difference(lambda t: log_likelihood(m, t, b), theta, h=1e-5)
        fd_b = central_difference(lambda v: log_likelihood(m, theta, v), b, h=1e-5)
        for got, want in ((g.theta, fd_t), (g.b, fd_b)):
            err = np.abs(got - want) / np.maximum(np.maximum(np.abs(got), np.abs(want)), 1.0)
            worst = max(worst, float(err.max()))
    check(2, worst <= 1e-6, f"50 matrices up to 10x10, worst relative error {worst:.2e} (<=1e-6)")


THREE_BY_THREE = [
    [[0, 0, 1], [0, 0, 1], [1, 1, 0]],
    [[0, 0, 1], [0, 1, 0], [1, 0, 0]],
    [[0, 0, 1], [0, 1, 0], [1, 0, 1]],
    [[0, 0, 1], [0, 1, 1], [1, 1, 0]],
    [[0, 1, 1], [1, 0, 1], [1, 1, 0]],
]


def test_criterion_3_grid_oracle():
    worst = 0.0
    for data in THREE_BY_THREE:
        res = calibrate_jml(ResponseMatrix.from_dense(np.array(data)))
        assert not res.exclusions
        g_theta, g_b, _ = grid_search_argmax(np.array(data))
        b = np.array([res.difficulties[f"I{j}"] for j in range(3)])
        theta = np.array([res.thetas[f"L{i}"] for i in range(3)])
        worst = max(worst, float(np.abs(b - g_b).max()), float(np.abs(theta - g_theta).max()))
    check(3, worst <= 0.05, f"5 matrices, max |JML - lattice argmax| = {worst:.4f} (<=0.05)")


def test_criterion_4_raw_score_sufficiency():
    cfg = SimConfig(n_learners=300, n_items=200, b_min=-2, b_max=2, seed=4)
    pop = sample_population(cfg)
    m = simulate_responses(pop.thetas, pop.bank.true_b, 4, pop.learner_ids, pop.bank.item_ids)
    res = calibrate_jml(m)
    counts = dict(zip(m.item_ids, np.bincount(m.cols, weights=m.x, minlength=m.n_items)))
    est = {p.item_id: p.b for p in res.items}
    ties, worst_tie, misordered = 0, 0.0, 0
    for a in est:
        for c in est:
            if a >= c:
                continue
            if counts[a] == counts[c]:
                ties += 1
                worst_tie = max(worst_tie, abs(est[a] - est[c]))
            elif (counts[a] > counts[c]) != (est[a] < est[c]):
                misordered += 1
    check(4, ties > 0 and worst_tie <= 1e-3 and misordered == 0,
          f"{ties} tied pairs, max tie gap {worst_tie:.1e} (<=1e-3), {misordered} misordered pairs")


def test_criterion_5_filtering_arithmetic():
    independent = filter_fixture(3040, 1425, prefix="I")
    passage = filter_fixture(8102, 8102 - 2903, prefix="P")
    items = [ItemMeta(f"I{j:05d}", "independent") for j in range(3040)]
    items += [ItemMeta(f"P{j:05d}", "passage", f"G{j // 4}") for j in range(8102)]
    events = independent + passage

    def counts(kind):
        wanted = {m.item_id for m in items if m.kind == kind}
        firsts = first_attempts([e for e in events if e.item_id in wanted])
        _, removed, kept = filter_min_responses(firsts, 100)
        return removed, kept

    ind, pas = counts("independent"), counts("passage")
    check(5, ind == (1425, 1615) and pas[1] == 2903,
          f"independent removed/kept {ind[0]}/{ind[1]} (1425/1615), passage kept {pas[1]} of 8102 (2903)")


def test_criterion_6_routing_signature():
    diffs = []
    for seed in range(20):
        cfg = SimConfig(seed=seed, routing_level=1.5, theta_mean=0.0, study_learners=35)
        study = simulate_study(cfg)
        cal = pipeline.run_calibration(study.database_events())
        b = {p.item_id: p.b for p in cal.result.items}
        routing = {s.truth.learner_id: s.truth.routing_end_ts for s in study.sessions}
        analysis = pipeline.run_analysis(b, study.session_events(), study.administrations(),
                                         study.subscale_map, routing)
        routing_idx = {r.administration_index for r in analysis.records if r.phase == "routing"}
        first_learning = min(r.administration_index for r in analysis.records if r.phase == "learning")
        trend = {t.administration_index: t.diff_std_mean for t in analysis.trends}
        diffs.append(np.mean([trend[i] for i in sorted(routing_idx)]) - trend[first_learning])
    mean_gap = float(np.mean(diffs))
    check(6, mean_gap > 0,
          f"routing minus first learning interval diff_std, mean over 20 seeds = {mean_gap:.3f} (>0); "
          f"positive in {sum(d > 0 for d in diffs)}/20 seeds")


def run_pipeline(out: Path, seed=7):
    fixture = out / "fixture"
    results = out / "results"
    assert main(["simulate", "--seed", str(seed), "--out", str(fixture)]) == 0
    assert main(["calibrate", "--fixture", str(fixture), "--out", str(results)]) == 0
    assert main(["analyze", "--fixture", str(fixture), "--out", str(results)]) == 0
    return fixture, results


@pytest.fixture(scope="module")
def pipeline_runs(tmp_path_factory):
    return [run_pipeline(tmp_path_factory.mktemp(f"run{k}")) for k in range(2)]


def test_criterion_7_proxy_recovery(pipeline_runs):
    _, results = pipeline_runs[0]
    records = pipeline.parse_proxy((results / "proxy.csv").read_bytes())
    stats = alignment_stats([r.combined_std for r in records], [r.cl_reported for r in records])
    check(7, stats.pearson_r is not None and stats.pearson_r >= 0.9,
          f"pearson r(combined_std, cl_reported) = {stats.pearson_r:.4f} (>=0.9) over {stats.n} records")


def test_criterion_8_determinism(pipeline_runs):
    def tree(root):
        return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}

    (fa, ra), (fb, rb) = pipeline_runs
    a = {**{f"fixture/{k}": v for k, v in tree(fa).items()}, **{f"results/{k}": v for k, v in tree(ra).items()}}
    b = {**{f"fixture/{k}": v for k, v in tree(fb).items()}, **{f"results/{k}": v for k, v in tree(rb).items()}}
    differing = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    check(8, not differing and len(a) > 0,
          f"{len(a)} files compared, {len(differing)} differ" + (f": {differing}" if differing else ""))


REQUIRED_SUITES = (
    "test_standardization_order_preservation",
    "test_segment_partition",
    "test_first_attempt_idempotence",
    "test_complement_symmetry",
    "test_translation_invariance",
)


def test_criterion_9_invariant_suites():
    import test_properties

    short = [n for n in REQUIRED_SUITES
             if getattr(test_properties, n)._hypothesis_internal_use_settings.max_examples < 200]
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", str(TESTS / "test_properties.py")],
        capture_output=True, text=True, cwd=TESTS.parent,
    )
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    check(9, proc.returncode == 0 and not short,
          f"property suite: {summary}; suites under 200 cases: {short or 'none'}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
