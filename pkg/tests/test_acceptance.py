"""Top-level acceptance checks for the whole pipeline.

Each test prints a single PASS/FAIL line (A1..A10) to the real stdout so the
verdicts survive pytest's capture, then asserts. The end-to-end experiment
(A7/A8) trains three seeded runs on the synthetic doubling corpus and is the
slow part of the suite.
"""

from __future__ import annotations

import itertools
import time
from pathlib import Path

import conftest
import numpy as np
import pytest
from scipy import stats as scipy_stats

from perfrl import evaluation, losses, trainer
from perfrl.corpus import TaskInstance, UnitTest
from perfrl.evaluation import (
    CandidateEvalRecord,
    MetricsReport,
    TaskEvalResult,
    aggregate,
    evaluate_model,
    load_results,
    runtime_reduction,
    save_results,
    speedup,
)
from perfrl.policy import ByteTokenizer, CandidateGroupSpec, PolicyModel, PolicyParams, load_checkpoint
from perfrl.reward import RewardConfig, assign_reward
from perfrl.sampling import SamplingConfig, beam_search, sample_token, tempered_topk_distribution
from perfrl.trainer import TrainConfig

from helpers import FAST_TEMPLATE, SLOW_TEMPLATE, HashModel, exhaustive_best, make_micro_corpus
from test_policy import _random_spec, finite_difference_check


def _report(tag: str, ok: bool, detail: str = "") -> None:
    line = f"{tag}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    print(line, flush=True)
    conftest.acceptance_verdicts.append(line)
    assert ok, line


# -- A1: loss formulas against independent oracles ----------------------


def _oracle_rank_loss(scores, rewards):
    return sum(
        max(0.0, scores[a] - scores[b])
        for a, b in itertools.product(range(len(scores)), repeat=2)
        if rewards[a] < rewards[b]
    )


def _oracle_best(rewards, origins, scores):
    prio = {"random": 0, "greedy": 1, "target": 2}
    keyed = [
        (-rewards[i], prio[origins[i]], -scores[i], i)
        for i in range(len(rewards))
    ]
    return min(keyed)[3]


def test_a1_loss_values_match_oracle():
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 6))
        lengths = [int(rng.integers(1, 9)) for _ in range(n)]
        lps = [-rng.random(t) for t in lengths]
        scores = [float(lp.mean()) for lp in lps]
        sums = [float(lp.sum()) for lp in lps]
        rewards = [float(rng.choice([0.0, 1.0, 1.3, 2.0])) for _ in range(n)]
        origins = [str(rng.choice(["random", "greedy", "target"])) for _ in range(n)]
        a = float(rng.uniform(0.0, 2.0))

        best = _oracle_best(rewards, origins, scores)
        expect_rank = _oracle_rank_loss(scores, rewards)
        expect_total = a * expect_rank - sums[best]

        parts = losses.combined_loss_parts(scores, sums, lengths, rewards, origins, a)
        worst = max(
            worst,
            abs(losses.rank_loss(scores, rewards) - expect_rank),
            abs(parts.rank - expect_rank),
            abs(parts.tuning + sums[best]),
            abs(parts.total - expect_total),
            abs(losses.tuning_loss(sums, best) + sums[best]),
        )
        if losses.select_best_index(rewards, origins, scores) != best:
            _report("A1", False, "best-candidate selection disagrees with oracle")
        for lp, s in zip(lps, scores):
            worst = max(worst, abs(losses.mean_score(list(lp)) - s))
    _report("A1", worst < 1e-12, f"max abs deviation {worst:.2e}")


# -- A2: analytic gradients against central finite differences ----------


def test_a2_gradients_match_finite_differences():
    tok = ByteTokenizer()
    worst_note = "22 instances, 50 coords each, step 1e-5"
    rng = np.random.default_rng(202)
    for case in range(22):
        params = PolicyParams.initialize(tok.vocab_size, 4, 8, 16, seed=1000 + case)
        model = PolicyModel(params, tok)
        spec = _random_spec(
            model, rng,
            n=int(rng.integers(2, 5)),
            same_tier=(case == 20),
            hinge_boundary=(case == 21),
        )
        try:
            finite_difference_check(model, spec, rng, n_coords=50, step=1e-5, tol=1e-4)
        except AssertionError as exc:
            _report("A2", False, f"instance {case}: {exc}")
    _report("A2", True, worst_note)


# -- A3: beam search optimality on exhaustively enumerable models -------


def test_a3_beam_search_finds_global_optimum():
    checked = 0
    for seed in range(100):
        rng = np.random.default_rng(1234 + seed)
        vocab = int(rng.integers(3, 7))
        depth = int(rng.integers(2, 5))
        model = HashModel(vocab, seed=seed)
        config = SamplingConfig(beam_width=vocab ** depth, max_len=depth, top_k=vocab)
        best = beam_search(model, [model.bos_id], config)[0]
        oracle_tokens, oracle_score = exhaustive_best(model, [model.bos_id], depth)
        if not np.isclose(best.cumulative_log_prob, oracle_score, atol=1e-9):
            _report("A3", False, f"model {seed}: {best.cumulative_log_prob} vs {oracle_score}")
        checked += 1
    _report("A3", checked == 100, f"{checked} random models, width >= vocab**depth")


# -- A4: sampler distribution -------------------------------------------


def test_a4_sampling_distribution():
    probs = np.array([0.5, 0.3, 0.2])
    lp = np.log(probs)
    rng = np.random.default_rng(42)
    draws = np.array([sample_token(lp, 1.0, 3, rng) for _ in range(10000)])
    observed = np.bincount(draws, minlength=3)
    pvalue = float(scipy_stats.chisquare(observed, f_exp=probs * 10000).pvalue)

    worst = 0.0
    for tem in (0.5, 1.0, 2.0):
        keep, got = tempered_topk_distribution(lp, tem, 3)
        expect = probs[keep] ** (1.0 / tem)
        expect /= expect.sum()
        worst = max(worst, float(np.abs(got - expect).max()))
    ok = pvalue > 0.01 and worst < 1e-9
    _report("A4", ok, f"chi-square p={pvalue:.3f}, temperature dev {worst:.1e}")


# -- A5: execution outcomes map onto the reward ladder ------------------


def test_a5_reward_tiers_from_fixture_programs(sandbox):
    tests = [UnitTest(input="3\n", expected_output="6")]
    fixtures = [
        ("def f(:\n", 1.0, "R1"),                       # unparseable
        ("raise RuntimeError('boom')\n", 1.0, "R2"),    # crashes
        ("print(int(input()) * 3)\n", 1.0, "R2"),       # wrong answer
        (SLOW_TEMPLATE, 1e-6, "R3"),                    # passes, not faster
        (FAST_TEMPLATE, 100.0, "R4"),                   # passes, faster
    ]
    cfg = RewardConfig()
    for rep in range(5):
        for source, baseline, expect in fixtures:
            outcome = sandbox.evaluate_program(source, tests, timeout=3.0, repeats=1)
            tier = assign_reward(outcome, baseline, cfg)
            if tier.tier != expect:
                _report("A5", False, f"rep {rep}: expected {expect}, got {tier.tier}")
    _report("A5", True, "5 fixtures x 5 repetitions, tiers R1,R2,R2,R3,R4")


# -- A6: rank loss depends only on the tier ordering --------------------


def test_a6_rank_loss_invariant_under_reward_revaluation():
    default_values = (0.0, 1.0, 1.3, 2.0)
    shifted_values = (-5.0, 0.0, 7.0, 7.1)
    rng = np.random.default_rng(606)
    for _ in range(100):
        n = int(rng.integers(2, 6))
        scores = list(rng.normal(size=n))
        origins = [str(rng.choice(["random", "greedy", "target"])) for _ in range(n)]
        tiers = rng.integers(0, 4, size=n)
        a = [default_values[t] for t in tiers]
        b = [shifted_values[t] for t in tiers]
        if losses.rank_loss(scores, a) != losses.rank_loss(scores, b):
            _report("A6", False, "rank loss changed under order-preserving revaluation")
        if losses.select_best_index(a, origins, scores) != losses.select_best_index(
            b, origins, scores
        ):
            _report("A6", False, "best-candidate choice changed under revaluation")
    _report("A6", True, "100 instances bit-identical across reward value sets")


# -- A7/A8: the end-to-end experiment -----------------------------------

SEEDS = (0, 1, 2)


def _experiment_config(seed: int) -> TrainConfig:
    return TrainConfig(
        rl_learning_rate=0.01,
        rl_steps=8,
        epochs_per_step=3,
        sampling=SamplingConfig(beam_width=4, max_len=128, seed=seed),
        timeout=2.0,
        train_repeats=1,
    )


def _fresh_model(seed: int) -> PolicyModel:
    tok = ByteTokenizer()
    params = PolicyParams.initialize(tok.vocab_size, 8, 32, 128, seed=seed)
    return PolicyModel(params, tok)


@pytest.fixture(scope="module")
def experiment(sandbox, tmp_path_factory):
    """Train + evaluate one run per seed; shared by the A7 and A8 checks."""
    runs = []
    tasks = make_micro_corpus(20)
    for seed in SEEDS:
        run_dir = tmp_path_factory.mktemp(f"exp-seed{seed}")
        config = _experiment_config(seed)
        model = _fresh_model(seed)
        start = time.perf_counter()
        model, history = trainer.train(model, tasks, sandbox, config, run_dir)
        train_time = time.perf_counter() - start

        ft_model = PolicyModel(load_checkpoint(run_dir / "ft.ckpt"), ByteTokenizer())
        eval_cfg = SamplingConfig(beam_width=4, max_len=128, seed=seed)
        ft_report, _ = evaluate_model(
            ft_model, tasks, sandbox, eval_cfg, timeout=2.0, repeats=3
        )
        rl_report, _ = evaluate_model(
            model, tasks, sandbox, eval_cfg, timeout=2.0, repeats=3
        )
        runs.append({
            "seed": seed,
            "history": history,
            "train_time": train_time,
            "ft": ft_report,
            "rl": rl_report,
        })
    return runs


def test_a7_per_step_rate_floor_and_ordering(experiment):
    floor = 20 / (4 * 20)  # one injected reference solution per task
    for run in experiment:
        if len(run["history"]) != 8:
            _report("A7", False, f"seed {run['seed']}: {len(run['history'])} steps")
        for step in run["history"]:
            if step.pass_rate < floor:
                _report("A7", False,
                        f"seed {run['seed']} step {step.step}: pass rate "
                        f"{step.pass_rate:.3f} below floor {floor}")
            if not (step.optimization_rate <= step.pass_rate <= step.compilation_rate):
                _report("A7", False,
                        f"seed {run['seed']} step {step.step}: rate ordering violated")
    _report("A7", True, f"floor {floor} and ordering hold for all steps of {len(SEEDS)} runs")


def test_a8_rl_improves_over_fine_tuning_alone(experiment):
    slow = [r for r in experiment if r["train_time"] >= 900.0]
    if slow:
        _report("A8", False, f"training exceeded 15 minutes for seeds {[r['seed'] for r in slow]}")
    beats = sum(
        r["rl"].optimization_rate > r["ft"].optimization_rate for r in experiment
    )
    nonzero = sum(r["rl"].percent_opt > 0.0 for r in experiment)
    detail = (
        f"rl beats ft on {beats}/{len(SEEDS)} seeds, "
        f"%OPT>0 on {nonzero}/{len(SEEDS)}, "
        f"max train time {max(r['train_time'] for r in experiment):.0f}s"
    )
    _report("A8", beats >= 2 and nonzero >= 2, detail)


# -- A9: reported metrics recompute from saved per-task results ---------


def test_a9_metric_definitions_and_aggregation(tmp_path):
    ok = (
        speedup(2.0, 0.5) == 4.0
        and runtime_reduction(2.0, 0.5) == 75.0
        and speedup(1.0, 1.0) == 1.0
        and runtime_reduction(1.0, 1.0) == 0.0
    )
    if not ok:
        _report("A9", False, "speedup / runtime-reduction formulas wrong")

    rng = np.random.default_rng(909)
    results = []
    for i in range(40):
        kinds = [str(rng.choice(["syntax_error", "failed", "passed"])) for _ in range(2)]
        baseline = float(rng.uniform(0.5, 2.0)) if rng.random() > 0.1 else None
        records, runtimes = [], []
        for kind in kinds:
            runtime = float(rng.uniform(0.1, 2.5)) if kind == "passed" else None
            improved = (
                baseline is not None and kind == "passed" and runtime < baseline * 0.98
            )
            records.append(CandidateEvalRecord(kind=kind, runtime=runtime, improved=improved))
            if improved:
                runtimes.append(runtime)
        results.append(TaskEvalResult(
            task_id=f"t{i}",
            baseline_runtime=baseline,
            candidates=tuple(records),
            optimized=bool(runtimes),
            best_new_runtime=min(runtimes) if runtimes else None,
        ))

    report = aggregate(results)
    opt = [r for r in results if r.optimized]
    expect_opt_rate = len(opt) / len(results)
    expect_sp = (
        sum(r.baseline_runtime / r.best_new_runtime for r in opt) / len(opt) if opt else 0.0
    )
    expect_rtr = (
        sum(100.0 * (r.baseline_runtime - r.best_new_runtime) / r.baseline_runtime
            for r in opt) / len(opt)
        if opt else 0.0
    )
    formulas_ok = (
        report.percent_opt == pytest.approx(100.0 * expect_opt_rate, abs=1e-12)
        and report.optimization_rate == pytest.approx(expect_opt_rate, abs=1e-12)
        and report.speedup_mean == pytest.approx(expect_sp, abs=1e-12)
        and report.rtr_mean == pytest.approx(expect_rtr, abs=1e-12)
        and report.optimization_rate <= report.pass_rate <= report.compilation_rate
    )
    if not formulas_ok:
        _report("A9", False, "aggregate disagrees with direct recomputation")

    path = tmp_path / "results.jsonl"
    save_results(results, path)
    reloaded = aggregate(load_results(path))
    _report("A9", reloaded == report, "aggregation identical after save/load round-trip")


# -- A10: determinism and resume ----------------------------------------


def _final_checkpoint_bytes(run_dir: Path) -> bytes:
    steps = sorted(run_dir.glob("step_*.ckpt"))
    return steps[-1].read_bytes()


def test_a10_runs_are_deterministic_and_resumable(sandbox, tmp_path):
    tasks = make_micro_corpus(6)
    config = TrainConfig(
        rl_learning_rate=0.01,
        rl_steps=3,
        epochs_per_step=3,
        sampling=SamplingConfig(beam_width=4, max_len=128, seed=5),
        timeout=2.0,
        train_repeats=1,
    )

    dirs = {name: tmp_path / name for name in ("straight", "replay", "interrupted")}
    trainer.train(_fresh_model(5), tasks, sandbox, config, dirs["straight"])
    trainer.train(_fresh_model(5), tasks, sandbox, config, dirs["replay"])

    trainer.train(
        _fresh_model(5), tasks, sandbox, config, dirs["interrupted"], stop_after_step=1
    )
    if not (dirs["interrupted"] / "step_001.ckpt").exists():
        _report("A10", False, "interrupted run left no step checkpoint")
    trainer.train(_fresh_model(5), tasks, sandbox, config, dirs["interrupted"], resume=True)

    reference = _final_checkpoint_bytes(dirs["straight"])
    if _final_checkpoint_bytes(dirs["replay"]) != reference:
        _report("A10", False, "same-seed replay produced a different final checkpoint")
    if _final_checkpoint_bytes(dirs["interrupted"]) != reference:
        _report("A10", False, "interrupt + resume diverged from the straight run")
    ft_match = (
        (dirs["straight"] / "ft.ckpt").read_bytes()
        == (dirs["replay"] / "ft.ckpt").read_bytes()
    )
    _report("A10", ft_match, "replay and resumed runs bit-identical to reference")
