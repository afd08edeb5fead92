"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they are
produced; they are also repeated in the terminal summary.
"""

import itertools
import json
import math
import socket
import subprocess
import sys
import time
import uuid

import numpy as np
import pytest

from helpers import http_json, mutate_user
from oracles import naive_dct, pair_count_auc, recursive_dtw, sweep_eer
from wristsig.classifiers import build_training_set, logistic, save_model, train_logistic
from wristsig.cli import run_cli
from wristsig.dtw import dtw_batch, dtw_distance
from wristsig.evaluation import ExperimentConfig, FeatureSubset, Task, run_executions, run_experiment
from wristsig.evaluation.metrics import auc_from_arrays, eer_from_arrays
from wristsig.signal import Dimension, MotionSignal, dct_compress
from wristsig.service import format_timestamp, recording_payload
from wristsig.storage import read_corpus, recording_to_csv, write_corpus
from wristsig.synth import GeneratorParams, generate_corpus, null_params

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def default_corpus():
    return generate_corpus(GeneratorParams())


# ---------------------------------------------------------------- 1. DTW oracle


def test_criterion_1_dtw_oracle(criterion):
    start = time.perf_counter()
    seqs = [s for n in range(1, 7) for s in itertools.product((0, 1, 2), repeat=n)]
    mismatches = 0
    try:
        for a in seqs:
            for b in seqs:
                if dtw_distance(a, b).distance != recursive_dtw(a, b):
                    mismatches += 1
        # the batched kernel on the same pairs, grouped by length
        for la in range(1, 7):
            A = np.array([s for s in seqs if len(s) == la], dtype=float)
            for lb in range(1, 7):
                B = np.array([s for s in seqs if len(s) == lb], dtype=float)
                ia, ib = np.meshgrid(np.arange(len(A)), np.arange(len(B)), indexing="ij")
                got = dtw_batch(A[ia.ravel()], B[ib.ravel()])
                want = [recursive_dtw(tuple(A[i].astype(int)), tuple(B[j].astype(int))) for i, j in zip(ia.ravel(), ib.ravel())]
                mismatches += int(np.sum(got != np.array(want, dtype=float)))
    finally:
        recursive_dtw.cache_clear()
    n_exhaustive = len(seqs) ** 2
    rng = np.random.default_rng(1)
    random_bad = 0
    for _ in range(1000):
        a = tuple(rng.normal(size=int(rng.integers(1, 13))).tolist())
        b = tuple(rng.normal(size=int(rng.integers(1, 13))).tolist())
        if dtw_distance(a, b).distance != recursive_dtw(a, b):
            random_bad += 1
        if dtw_batch(np.array([a]), np.array([b]))[0] != recursive_dtw(a, b):
            random_bad += 1
    recursive_dtw.cache_clear()
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and random_bad == 0 and elapsed < 60
    assert criterion(1, ok, f"{n_exhaustive} exhaustive pairs + 1000 random pairs, "
                            f"{mismatches + random_bad} mismatches, {elapsed:.1f}s (limit 60s)")


# ---------------------------------------------------------------- 2. DCT oracle


def test_criterion_2_dct_oracle(criterion):
    rng = np.random.default_rng(2)
    worst = worst_energy = 0.0
    for i in range(1000):
        n = int(rng.integers(1, 257))
        x = rng.normal(size=n) * rng.uniform(0.1, 10)
        k = int(rng.integers(1, 40))
        got = dct_compress(MotionSignal(x, Dimension.ACC_X), k=k).coefficients
        worst = max(worst, float(np.max(np.abs(got - np.array(naive_dct(x.tolist(), k))))))
        full = dct_compress(MotionSignal(x, Dimension.ACC_X), k=n).coefficients
        worst_energy = max(worst_energy, abs(float(np.sum(full**2) - np.sum(x**2))))
    ok = worst <= 1e-9 and worst_energy <= 1e-9
    assert criterion(2, ok, f"1000 signals N<=256: max coefficient error {worst:.2e}, "
                            f"max energy error {worst_energy:.2e} (limit 1e-9)")


# ---------------------------------------------------------------- 3. metric oracles


def test_criterion_3_metric_oracles(criterion):
    rng = np.random.default_rng(3)
    auc_bad, eer_worst, mono_bad = 0, 0.0, 0
    transforms = (np.exp, lambda s: s**3, lambda s: 10 * s + 3, np.arctan)
    for _ in range(1000):
        total = int(rng.integers(2, 31))
        n_gen = int(rng.integers(1, total))
        # coarse grid so ties occur
        vals = rng.integers(0, 12, size=total) / 11 if rng.random() < 0.5 else rng.random(total)
        gen, forg = vals[:n_gen], vals[n_gen:]
        auc = auc_from_arrays(gen, forg)
        auc_bad += auc != pair_count_auc(gen.tolist(), forg.tolist())
        eer_worst = max(eer_worst, abs(eer_from_arrays(gen, forg) - sweep_eer(gen.tolist(), forg.tolist())))
        mono_bad += sum(auc_from_arrays(f(gen), f(forg)) != auc for f in transforms)
    ok = auc_bad == 0 and eer_worst <= 1e-9 and mono_bad == 0
    assert criterion(3, ok, f"1000 score sets: {auc_bad} AUC mismatches, EER max error {eer_worst:.1e}, "
                            f"{mono_bad} monotone-transform violations")


# ---------------------------------------------------------------- 4. gradient check


def test_criterion_4_logistic_gradient(criterion):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        n, d = int(rng.integers(5, 60)), int(rng.integers(1, 10))
        Z = rng.normal(size=(n, d)) * rng.uniform(0.5, 3)
        y = (rng.random(n) < 0.5).astype(float)
        theta = rng.normal(size=d + 1) * rng.uniform(0.1, 2)
        ridge = 10 ** rng.uniform(-8, 0)
        _, grad = logistic.loss_and_grad(theta, Z, y, ridge)
        fd = np.empty_like(theta)
        for i in range(theta.size):
            h = 1e-6 * max(1.0, abs(theta[i]))
            e = np.zeros_like(theta)
            e[i] = h
            fd[i] = (logistic.loss_and_grad(theta + e, Z, y, ridge)[0] - logistic.loss_and_grad(theta - e, Z, y, ridge)[0]) / (2 * h)
        worst = max(worst, float(np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-8)))
    increases = 0
    for _ in range(20):
        ts = build_training_set(generate_corpus(GeneratorParams(n_users=6, seed=int(rng.integers(1000)))), 0)
        mean, scale = logistic.standardizer(ts.X)
        _, history, _ = logistic.fit((ts.X - mean) / scale, ts.y.astype(float))
        increases += sum(b > a for a, b in zip(history, history[1:]))
    ok = worst < 1e-4 and increases == 0
    assert criterion(4, ok, f"100 points: max relative gradient error {worst:.2e} (limit 1e-4); "
                            f"{increases} loss increases over 20 fits")


# ---------------------------------------------------------------- 5. protocol fidelity


def test_criterion_5_protocol_fidelity(criterion, default_corpus, tmp_path):
    write_corpus(default_corpus, tmp_path / "corpus")
    report_path = tmp_path / "report.json"
    code = run_cli(["evaluate", "--corpus", str(tmp_path / "corpus"), "--reps", "25",
                    "--task", "skilled,random,any", "--report", str(report_path)])
    cells = json.loads(report_path.read_text())["cells"] if code == 0 else []
    cell_counts = sorted({c["n_executions"] for c in cells})

    corpus = read_corpus(tmp_path / "corpus", standard_shape=True)
    config = ExperimentConfig(n_repetitions=25, tasks=(Task.ANY,))
    base = run_executions(corpus, config)
    wrong_shape = sum(
        (len(r.by_role("genuine")), len(r.by_role("skilled")), len(r.by_role("random"))) != (8, 15, 10)
        for r in base
    )
    victim = "u017"
    mutated = {(r.repetition, r.left_out_user): r.model_digest for r in run_executions(mutate_user(corpus, victim), config)}
    victim_changed = sum(r.model_digest != mutated[r.repetition, r.left_out_user] for r in base if r.left_out_user == victim)
    others_changed = sum(r.model_digest != mutated[r.repetition, r.left_out_user] for r in base if r.left_out_user != victim)
    ok = (code == 0 and len(cells) == 3 and cell_counts == [1650] and len(base) == 1650
          and wrong_shape == 0 and victim_changed == 0 and others_changed > 0)
    assert criterion(5, ok, f"executions per cell {cell_counts} (want [1650]); {wrong_shape} executions off 8/15/10; "
                            f"mutation probe: {victim_changed}/25 left-out models changed, "
                            f"{others_changed}/1625 other folds changed")


# ---------------------------------------------------------------- 6. qualitative trends


def test_criterion_6_trends(criterion, default_corpus):
    start = time.perf_counter()
    tasks = (Task.SKILLED, Task.RANDOM, Task.ANY)
    subsets = tuple(FeatureSubset)
    by_subset = run_experiment(default_corpus, ExperimentConfig(n_repetitions=5, subsets=subsets, tasks=tasks))
    sweep = run_experiment(default_corpus, ExperimentConfig(n_repetitions=5, n_refs=(2, 3, 4, 5, 6, 7), tasks=tasks))
    elapsed = time.perf_counter() - start

    def auc(report, task, subset="all", n=5):
        return report.cell("logistic", task, subset, n).auc_mean

    a = auc(by_subset, "random") >= auc(by_subset, "skilled")
    steps = {t.value: [auc(sweep, t, n=n) for n in range(2, 8)] for t in tasks}
    b = all(later >= earlier - 0.01 for s in steps.values() for earlier, later in zip(s, s[1:]))
    triples = [s for s in subsets if s is not FeatureSubset.ALL]
    c = all(auc(by_subset, t, "all") >= auc(by_subset, t, s) for t in tasks for s in triples)
    d = all(auc(by_subset, t, "z") < min(auc(by_subset, t, "x"), auc(by_subset, t, "y")) for t in tasks)
    ok = a and b and c and d and elapsed < 600
    lines = [
        f"(a) {'ok' if a else 'NO'} random {auc(by_subset, 'random'):.4f} >= skilled {auc(by_subset, 'skilled'):.4f}",
        f"(b) {'ok' if b else 'NO'} sweep 2-7 " + "; ".join(f"{t}: " + ",".join(f"{v:.4f}" for v in s) for t, s in steps.items()),
        f"(c) {'ok' if c else 'NO'} all-features vs best triple per task " + ", ".join(
            f"{t.value} {auc(by_subset, t):.4f}/{max(auc(by_subset, t, s) for s in triples):.4f}" for t in tasks),
        f"(d) {'ok' if d else 'NO'} skilled x/y/z " + "/".join(f"{auc(by_subset, 'skilled', s):.4f}" for s in ("x", "y", "z")),
        f"{elapsed:.0f}s (limit 600s)",
    ]
    assert criterion(6, ok, "; ".join(lines))


# ---------------------------------------------------------------- 7. null control


def test_criterion_7_null_control(criterion):
    corpus = generate_corpus(null_params(seed=7))
    report = run_experiment(corpus, ExperimentConfig(n_repetitions=5, tasks=(Task.SKILLED,)))
    value = report.cell("logistic", "skilled", "all", 5).auc_mean
    assert criterion(7, 0.4 <= value <= 0.6, f"null-generator SKILLED AUC {value:.4f} (want [0.4, 0.6])")


# ---------------------------------------------------------------- 8. service round trip


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_criterion_8_service_round_trip(criterion, default_corpus, tmp_path):
    target = default_corpus.users[0]
    others = type(default_corpus)(default_corpus.users[1:])
    model_path, store_path = tmp_path / "model.msig", tmp_path / "refs.msig"
    save_model(train_logistic(build_training_set(others.compressed(), seed=0)), model_path)
    port = _free_port()
    proc = subprocess.Popen(
        [sys.executable, "-m", "wristsig.cli", "serve", "--bind", f"127.0.0.1:{port}",
         "--model", str(model_path), "--store", str(store_path)],
        stdout=subprocess.PIPE, stderr=subprocess.STDOUT,
    )
    url = f"http://127.0.0.1:{port}"
    try:
        for _ in range(100):
            try:
                if http_json("GET", url + "/health")[0] == 200:
                    break
            except OSError:
                time.sleep(0.1)
        enroll = http_json("POST", url + "/enroll", {
            "user_id": target.user_id,
            "recordings": [recording_to_csv(r) for r in target.genuine[:5]],
        })

        def verify(rec, nonce):
            return http_json("POST", url + "/verify", {
                "user_id": target.user_id, "recording": recording_payload(rec),
                "signed_at": format_timestamp(time.time()), "nonce": nonce,
            })

        nonce = uuid.uuid4().hex
        g_status, genuine = verify(target.genuine[7], nonce)
        forgery = target.skilled_forgeries[0]
        f_status, forged = verify(forgery, uuid.uuid4().hex)
        replay_status, replay = verify(target.genuine[7], nonce)
    finally:
        proc.terminate()
        proc.wait(timeout=10)
    ok = (enroll[0] == 201 and g_status == 200 and genuine["decision"] == "GENUINE"
          and f_status == 200 and forged["score"] < genuine["score"]
          and replay_status == 409 and replay.get("error") == "ReplayRejected")
    assert criterion(8, ok, f"enroll {enroll[0]}; genuine {genuine.get('decision')} score {genuine.get('score', math.nan):.4f}; "
                            f"forgery by {forgery.forger_id} score {forged.get('score', math.nan):.4f}; replay -> {replay_status}")


# ---------------------------------------------------------------- 9. determinism


def test_criterion_9_determinism(criterion, tmp_path):
    assert run_cli(["generate", "--users", "12", "--seed", "9", "--out", str(tmp_path / "c")]) == 0
    outputs = []
    for name, jobs in (("a", "1"), ("b", "1"), ("c", "8")):
        path = tmp_path / f"{name}.json"
        code = run_cli(["evaluate", "--corpus", str(tmp_path / "c"), "--reps", "8", "--seed", "4",
                        "--classifier", "logistic,nb,rf", "--n-trees", "10", "--n-refs", "3-5",
                        "--subset", "all,x", "--jobs", jobs, "--report", str(path)])
        outputs.append(path.read_bytes() if code == 0 else b"")
    ok = bool(outputs[0]) and outputs[0] == outputs[1] == outputs[2]
    assert criterion(9, ok, f"3 evaluate runs (jobs 1, 1, 8): {len(set(outputs))} distinct report file(s), "
                            f"{len(outputs[0])} bytes")
