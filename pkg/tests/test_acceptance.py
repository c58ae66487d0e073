"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line (shown even under output
capture) before asserting.
"""

import json
import time
from collections import Counter

import numpy as np
import pytest

from speclab.bench import (
    BenchConfig,
    batched_run,
    fixture_path,
    load_config,
    load_fixture,
    report_json,
    run_experiment,
    strip_wallclock,
)
from speclab.bench.metrics import MatPolicy, compute_mat
from speclab.bench.oracles import run_oracle_suite
from speclab.core import SequenceState, StepMode, StepRecord
from speclab.drafters import ModelLinearDrafter, model_draft_tree
from speclab.model import SyntheticDraftModel, TableTargetModel, target_next
from speclab.verify import VerifyMode, verify
from speclab.viskip import (
    DecodeSession,
    GateConfig,
    RelevanceSource,
    autoregressive_decode,
    speculative_decode,
    viskip_decode,
)

from conftest import all_drafters, random_case
from exact import decode_paths, sampled_chain, sampled_tree, target_paths


@pytest.fixture
def verdict(capsys):
    def report(number, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        assert ok, detail
    return report


def test_greedy_losslessness(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    runs = mismatches = 0
    accepted = Counter()
    for case in range(200):
        target, state = random_case(rng, vocab=64)
        ref, _ = autoregressive_decode(target, state, max_new_tokens=128)
        for drafter in all_drafters(target, noise_seed=case):
            out, records = speculative_decode(target, drafter, state, max_new_tokens=128)
            runs += 1
            mismatches += out != ref
            accepted[drafter.name] += sum(r.accepted_count for r in records)
        for tau in (0.0, 0.35, 1.0):
            drafter = all_drafters(target, noise_seed=case)[case % 6]
            out, _ = viskip_decode(target, drafter, state, GateConfig(tau), max_new_tokens=128)
            runs += 1
            mismatches += out != ref
    elapsed = time.perf_counter() - start
    # every drafter must actually get tokens through verification, or the check is vacuous
    verdict(1, mismatches == 0 and len(accepted) == 6 and min(accepted.values()) > 0 and elapsed < 60,
            f"{runs} greedy decodes, {mismatches} mismatches vs AR, accepted draft tokens {dict(accepted)}, "
            f"{elapsed:.1f}s")


def _first_token_tv(target, state, propose, trials, seed):
    rng = np.random.default_rng(seed)
    mode = VerifyMode(1.0)
    counts = np.zeros(target.vocab_size)
    for _ in range(trials):
        outcome = verify(target, state, propose(rng), mode, rng)
        counts[outcome.committed[0]] += 1
    return 0.5 * float(np.abs(counts / trials - target_next(target, state)).sum())


def test_sampling_losslessness(verdict):
    start = time.perf_counter()
    target = TableTargetModel(vocab_size=8, context_order=2, seed=5, logit_scale=1.5)
    draft = SyntheticDraftModel(target, 0.6, noise_seed=1)
    state = SequenceState((1, 2, 3), (), (0, 1))

    def choose_with(rng):
        def choose(options):
            cdf = np.cumsum([w for _, w in options])
            i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            return options[min(i, len(options) - 1)][0]
        return choose

    mode = VerifyMode(1.0)
    tv_linear = _first_token_tv(target, state, lambda r: sampled_chain(draft, state, 3, 1.0, choose_with(r)),
                                100_000, 1)
    tv_tree = _first_token_tv(target, state, lambda r: sampled_tree(draft, state, 3, 1.0, choose_with(r)),
                              100_000, 2)
    tv_topk = _first_token_tv(target, state, lambda r: model_draft_tree(draft, state, 2, 3, 6, 0.0, mode),
                              100_000, 3)

    t4 = TableTargetModel(vocab_size=4, context_order=2, seed=11, logit_scale=1.5)
    d4 = SyntheticDraftModel(t4, 0.6, noise_seed=2)
    s4 = SequenceState((0, 1, 2), (), (0, 1))
    want = target_paths(t4, s4, 2, 1.0)
    err = 0.0
    for propose in (lambda s, c: sampled_chain(d4, s, 2, 1.0, c), lambda s, c: sampled_tree(d4, s, 2, 1.0, c)):
        got = decode_paths(t4, s4, 2, 1.0, propose)
        err = max(err, max(abs(got.get(p, 0.0) - w) for p, w in want.items()))
    elapsed = time.perf_counter() - start
    worst = max(tv_linear, tv_tree, tv_topk)
    verdict(2, worst <= 0.01 and err <= 1e-9 and elapsed < 60,
            f"TV linear {tv_linear:.4f}, tree {tv_tree:.4f}, top-k tree {tv_topk:.4f} (100k trials each); "
            f"exact length-2 max error {err:.1e}; {elapsed:.1f}s")


def test_drafter_oracles(verdict):
    failures = run_oracle_suite(cases=1000, seed=0, max_vocab=16, max_len=200, automaton_strings=100)
    bad = {k: len(v) for k, v in failures.items()}
    verdict(3, not any(bad.values()), f"mismatches per check {bad} over 1000 contexts and 100 strings")


def test_mat_arithmetic(verdict):
    forced = [StepRecord(i, StepMode.SPECULATIVE, n) for i, n in enumerate([3, 0, 2])]
    gates = [StepRecord(3 + i, StepMode.GREEDY_GATE, 0, 1.0, True) for i in range(2)]
    spec_only = compute_mat(forced + gates, MatPolicy.SPEC_STEPS_ONLY)
    all_steps = compute_mat(forced + gates, MatPolicy.ALL_STEPS)

    cfg = BenchConfig()
    cfg.draft.epsilon = 0.0
    cfg.draft.K = 4
    cfg.run.max_new_tokens = 60
    run = run_experiment(cfg, load_fixture("mini6.jsonl"), "draft-linear")
    ok = spec_only == 5 / 3 and all_steps == 1.0 and run.mat == 4.0 and not run.invariant_violations
    verdict(4, ok, f"forced trace MAT {spec_only:.4f} (spec steps) / {all_steps:.4f} (all steps); "
                   f"exact K=4 draft MAT {run.mat}")


def test_gate_semantics(verdict):
    target = TableTargetModel(vocab_size=16, context_order=2, seed=8, vision_influence=0.5)
    draft = SyntheticDraftModel(target, 0.2)
    sample = load_fixture("mini6.jsonl")[0]
    state = SequenceState(tuple(t % 16 for t in sample.prompt_tokens), (), sample.vision_span)

    def run(tau, trace):
        session = DecodeSession(target, ModelLinearDrafter(draft, 4), state, max_new_tokens=64,
                                gate=GateConfig(tau, relevance_source=RelevanceSource.TRACE_PLAYBACK),
                                relevance_trace=trace)
        _, records = session.run()
        gated = sum(r.mode is StepMode.GREEDY_GATE for r in records)
        return session.draft_invocations, sum(r.draft_calls for r in records), gated

    closed = run(0.35, [1.0])
    opened = run(1.0, [1.0])
    ladder = [run(tau, sample.relevance_trace)[2] for tau in (0.1, 0.3, 0.5, 0.9)]
    ok = closed[:2] == (0, 0) and opened[2] == 0 and all(a >= b for a, b in zip(ladder, ladder[1:]))
    verdict(5, ok, f"pinned trace: {closed[0]} draft invocations at tau 0.35, {opened[2]} gated steps at tau 1.0; "
                   f"gated steps over tau 0.1/0.3/0.5/0.9: {ladder}")


def test_batch_invariance(verdict):
    data = load_fixture("batch16.jsonl")
    differing = []
    for temperature in (0.0, 1.0):
        cfg = BenchConfig()
        cfg.run.temperature = temperature
        cfg.run.seed = 7
        for method in ("ar", "pld", "sam", "lookahead", "recycling", "draft-linear", "draft-tree"):
            outputs = []
            for batch_size in (1, 2, 8):
                report = batched_run(cfg, data, method, batch_size)
                assert not report.errors
                outputs.append({s.id: s.output for s in report.samples})
            if not outputs[0] == outputs[1] == outputs[2]:
                differing.append((method, temperature))
    verdict(6, not differing and len(data) == 16,
            f"16 samples x 7 methods x greedy/sampling x batch sizes 1/2/8; differing: {differing or 'none'}")


def test_probe_direction(verdict):
    cfg = load_config(fixture_path("adversarial.json"))
    data = load_fixture("adversarial.jsonl")
    ungated = run_experiment(cfg, data, "draft-linear")
    gated = run_experiment(cfg, data, "draft-linear", GateConfig(0.35))
    probe = ungated.probe
    high, low = probe["avg_accept_high"], probe["avg_accept_low"]
    ok = (high is not None and low is not None and high < low
          and gated.total_modeled_cost < ungated.total_modeled_cost)
    verdict(7, ok, f"high-visual steps {100 * probe['high_visual_share']:.1f}%, avg accept high {high:.2f} "
                   f"vs low {low:.2f}; modeled cost gated {gated.total_modeled_cost:.1f} "
                   f"vs ungated {ungated.total_modeled_cost:.1f}")


def _stripped(reports):
    return json.dumps(strip_wallclock(json.loads(report_json(reports))), indent=2, sort_keys=True)


def test_report_integrity(verdict):
    data = load_fixture("mini6.jsonl")

    def runs():
        cfg = BenchConfig()
        cfg.run.temperature = 0.8
        cfg.run.seed = 3
        cfg.run.max_new_tokens = 32
        return [run_experiment(cfg, data, "ar"), run_experiment(cfg, data, "draft-tree"),
                run_experiment(cfg, data, "recycling", GateConfig(0.35))]

    first, second = runs(), runs()
    ar = first[0]
    ends = {r.modeled_latency_cdf[-1][1] for r in first} | {r.wall_latency_cdf[-1][1] for r in first}
    identical = _stripped(first) == _stripped(second)
    ok = ar.modeled_speedup == 1.0 and ar.walltime_speedup == 1.0 and ends == {1.0} and identical
    verdict(8, ok, f"AR speedup modeled {ar.modeled_speedup} / wall {ar.walltime_speedup}; "
                   f"CDF end fractions {sorted(ends)}; stripped JSON identical across runs: {identical}")
