"""End-to-end acceptance gate.

Each test covers one numbered claim about the toolkit and prints a single
[PASS]/[FAIL] line (run pytest with -s to see them). The slow directional
and scale checks train real models, so this module takes a few minutes.
"""

import random
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

from corpusgen import learnability_corpus, substitute_corpus
from gujiseg.cli import main
from gujiseg.corpus import LABELS, M, O, Document, labelize, write_labeled_corpus
from gujiseg.crf import (
    TrainConfig,
    log_partition,
    marginals,
    objective_and_gradient,
    score_sequence,
    train,
    viterbi,
)
from gujiseg.evaluation import (
    Metrics,
    SplitSpec,
    evaluate,
    predict_labels,
    run_experiment,
    split,
)
from gujiseg.features import FeatureConfig, extract_features, extract_instances, featurize_chars
from oracles import brute_log_partition, brute_marginals, brute_viterbi, enumerate_scores, fd_gradient
from test_crf import make_model, random_attrs, random_model


@contextmanager
def criterion(number, description):
    try:
        yield
    except BaseException:
        print(f"[FAIL] criterion {number}: {description}")
        raise
    print(f"[PASS] criterion {number}: {description}")


@pytest.fixture(scope="module")
def substitute_docs():
    docs = substitute_corpus()
    assert len(docs) >= 1000
    return docs


EXPERIMENT_TRAIN = TrainConfig(max_iterations=150, tolerance=1e-5)
EXPERIMENT_SPLIT = SplitSpec(train_ratio=0.7, seed=9, repetitions=3)


def mean_result(docs, spec_str, k):
    cfg = FeatureConfig.from_spec(spec_str, k)
    return run_experiment(docs, cfg, EXPERIMENT_TRAIN, EXPERIMENT_SPLIT)


def test_criterion_1_inference_matches_enumeration():
    with criterion(1, "inference matches exhaustive enumeration on 100 random models"):
        rng = random.Random(101)
        started = time.perf_counter()
        for _ in range(100):
            m = random_model(rng)
            attrs = random_attrs(rng, m, tmax=8)

            log_z = log_partition(m, attrs)
            assert log_z == pytest.approx(brute_log_partition(m, attrs), abs=1e-8)
            total = sum(
                np.exp(s - log_z) for s in enumerate_scores(m, attrs).values()
            )
            assert total == pytest.approx(1.0, abs=1e-8)

            unary, pairwise = marginals(m, attrs)
            bu, bp = brute_marginals(m, attrs)
            assert np.abs(unary - bu).max() < 1e-8
            if len(attrs) > 1:
                assert np.abs(pairwise - bp).max() < 1e-8

            labels, score = viterbi(m, attrs)
            bids, bscore = brute_viterbi(m, attrs)
            assert labels == [m.labels[i] for i in bids]
            assert score == pytest.approx(bscore, abs=1e-8)
        assert time.perf_counter() - started < 10


def test_criterion_2_gradient_matches_finite_differences():
    with criterion(2, "analytic gradient matches finite differences at 50+ weight points"):
        rng = random.Random(202)
        started = time.perf_counter()
        base = random_model(rng, n_attrs=4, scale=1.0)
        dataset = []
        for _ in range(3):
            attrs = random_attrs(rng, base, tmax=5, tmin=2)
            dataset.append((attrs, [rng.choice(LABELS) for _ in attrs]))

        points = 0
        for _ in range(55):
            m = random_model(rng, n_attrs=4, scale=1.5)
            sigma = rng.uniform(0.5, 3.0)
            _, grad = objective_and_gradient(m, dataset, sigma)

            def objective():
                return objective_and_gradient(m, dataset, sigma)[0]

            coords = [(m.state_weights, grad.state), (m.trans_weights, grad.trans)]
            for arr, got in coords:
                i = rng.randrange(arr.shape[0])
                j = rng.randrange(arr.shape[1])

                def perturb(h, arr=arr, i=i, j=j):
                    arr[i, j] += h

                fd = fd_gradient(objective, perturb, h=1e-5)
                assert abs(got[i, j] - fd) / max(abs(fd), 1e-6) < 1e-4
            points += 1
        assert points >= 50
        assert time.perf_counter() - started < 10


def test_criterion_3_golden_feature_strings():
    with criterion(3, "feature extraction reproduces the documented instances verbatim"):
        seq = labelize(Document("g", "孝敬天啟，動必以禮。"))
        instances = extract_instances(seq, FeatureConfig(k=1))
        assert instances[3].label == M
        assert instances[3].attributes == ("w[-1]=天", "w[0]=啟", "w[1]=動")
        assert instances[2].label == O
        assert instances[2].attributes == ("w[-1]=敬", "w[0]=天", "w[1]=啟")

        abstract = ["C1", "C2", "C3", "C4", "C5"]
        got = extract_features(abstract, 2, FeatureConfig(k=1, use_bigrams=True))
        assert got == [
            "w[-1]=C2",
            "w[0]=C3",
            "w[1]=C4",
            "w[-1_0]=C2C3",
            "w[0_1]=C3C4",
        ]


def test_criterion_4_learnability():
    with criterion(4, "deterministic follow-rule corpus is learned to F1 >= 0.99"):
        started = time.perf_counter()
        docs = learnability_corpus(n_docs=2000, seed=7)
        result = run_experiment(
            docs,
            FeatureConfig(k=1),
            TrainConfig(),
            SplitSpec(train_ratio=0.7, seed=0, repetitions=1),
        )
        assert result.mean_f1 >= 0.99
        assert time.perf_counter() - started < 120


def test_criterion_5_directional_replication(substitute_docs):
    with criterion(5, "feature ablations move precision/recall in the reported directions"):
        c = {k: mean_result(substitute_docs, "c", k) for k in range(5)}
        cb = {k: mean_result(substitute_docs, "c,b", k) for k in (1, 2, 4)}

        # (a) adding bigrams helps at both narrow window widths
        assert cb[1].mean_f1 > c[1].mean_f1
        assert cb[2].mean_f1 > c[2].mean_f1

        # (b) widening the window helps the bigram model
        assert cb[4].mean_f1 > cb[1].mean_f1

        # (c) recall improves most when the immediate neighbor enters the window
        gains = [c[k + 1].mean_recall - c[k].mean_recall for k in range(4)]
        assert gains[0] > max(gains[1:])


def test_criterion_6_metric_identities():
    with criterion(6, "metric identities and the worked 5-position example hold"):
        got = evaluate([[O, O, M, O, M]], [[O, M, M, O, O]])
        assert got == Metrics(tp=1, fp=1, fn=1, tn=2)
        assert got.precision == 0.5
        assert got.recall == 0.5
        assert got.f1 == 0.5
        assert got.item_accuracy == 0.6

        rng = random.Random(606)
        for _ in range(300):
            m = Metrics(*(rng.randint(0, 40) for _ in range(4)))
            n = m.tp + m.fp + m.fn + m.tn
            if n == 0:
                continue
            exact_acc = 1 - Fraction(m.fp + m.fn, n)
            assert m.item_accuracy == pytest.approx(float(exact_acc), abs=1e-12)
            if m.tp + m.fp and m.tp + m.fn:
                p = Fraction(m.tp, m.tp + m.fp)
                r = Fraction(m.tp, m.tp + m.fn)
                if p + r:
                    exact_f1 = 2 * p * r / (p + r)
                    assert m.f1 == pytest.approx(float(exact_f1), abs=1e-12)
                    assert m.f1 == pytest.approx(
                        2 * m.precision * m.recall / (m.precision + m.recall),
                        abs=1e-12,
                    )


def test_criterion_7_sweep_determinism(tmp_path):
    with criterion(7, "repeated sweep runs produce byte-identical CSV"):
        docs = learnability_corpus(n_docs=60, seed=77)
        outputs = []
        for name in ("a", "b"):
            d = tmp_path / name
            d.mkdir()
            corpus = d / "corpus.tsv"
            with open(corpus, "w", encoding="utf-8") as fh:
                write_labeled_corpus(docs, fh)
            out = d / "results.csv"
            rc = main([
                "sweep", str(corpus), "-o", str(out),
                "--k-min", "1", "--k-max", "2", "--trials", "2",
                "--seed", "13", "--max-iterations", "8",
            ])
            assert rc == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]


def test_criterion_8_scale():
    with criterion(8, "1000 x ~480-char training under 10 min, 30% decode under 30 s"):
        docs = substitute_corpus(n_docs=1000, min_clauses=82, max_clauses=95)
        mean_len = sum(len(d) for d in docs) / len(docs)
        assert 400 <= mean_len <= 560

        cfg = FeatureConfig(k=2, use_bigrams=True)
        started = time.perf_counter()
        dataset = [(featurize_chars(d.chars, cfg), d.labels) for d in docs]
        model = train(dataset, TrainConfig(), feature_config=cfg)
        train_seconds = time.perf_counter() - started
        assert train_seconds < 600

        _, test_docs = split(docs, SplitSpec(train_ratio=0.7, seed=0, repetitions=1), 0)
        started = time.perf_counter()
        preds = predict_labels(model, [d.chars for d in test_docs])
        decode_seconds = time.perf_counter() - started
        assert decode_seconds < 30

        scored = evaluate(test_docs, preds)
        assert scored.f1 > 0.7
