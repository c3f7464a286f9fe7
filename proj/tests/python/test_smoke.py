# SPDX-License-Identifier: Apache-2.0
"""Smoke tests for the python bindings."""

import math

import numpy as np
import pytest

import jdagg


def test_version():
    assert jdagg.__version__


def test_segment_description():
    assert jdagg.segment_description("• Design APIs\n• Write tests") == [
        "Design APIs",
        "Write tests",
    ]
    assert jdagg.segment_description("") == ["<empty>"]
    assert jdagg.segment_description("1. Build CRM\n2) Manage docs") == [
        "Build CRM",
        "Manage docs",
    ]


def test_detect_language():
    assert jdagg.detect_language("Data Analyst") == "english"
    assert jdagg.detect_language("นักบัญชี") == "thai"
    assert jdagg.detect_language("Dev ไทย") == "code_switched"
    with pytest.raises(jdagg.JdaggError):
        jdagg.detect_language("")


def test_encoder_determinism_and_linearity():
    config = jdagg.HashEncoderConfig(dim=16, buckets=4096, seed=3)
    a = jdagg.encode_sentence("data analyst", config)
    b = jdagg.encode_sentence("data analyst", config)
    np.testing.assert_array_equal(a, b)

    x = jdagg.encode_sentence("x", config)
    y = jdagg.encode_sentence("y", config)
    xy = jdagg.encode_sentence("x y", config)
    np.testing.assert_allclose(xy, (x + y) / 2.0, atol=1e-6)

    matrix = jdagg.encode_segments(["a b", "c"], config)
    assert matrix.shape == (2, 16)


def test_bidirectional_loss_matches_numpy():
    rng = np.random.default_rng(0)
    s = rng.uniform(-1.0, 1.0, size=(4, 4)).astype(np.float32)
    tau = 0.1
    value, grad = jdagg.bidirectional_loss(s, tau)

    z = s.astype(np.float64) / tau
    row = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
    col = np.exp(z) / np.exp(z).sum(axis=0, keepdims=True)
    expected = -(np.log(np.diag(row)) + np.log(np.diag(col))).mean()
    assert value == pytest.approx(expected, abs=1e-6)
    assert grad.shape == (4, 4)

    # single pair: exactly zero
    value1, _ = jdagg.bidirectional_loss(np.array([[0.7]], dtype=np.float32), 0.05)
    assert value1 == 0.0

    # shift invariance
    value_shifted, _ = jdagg.bidirectional_loss(s + 0.3, tau)
    assert value_shifted == pytest.approx(value, abs=1e-6)


def test_metrics():
    assert jdagg.recall_at_k(["a", "b", "c"], {"a", "c"}, 2) == 0.5
    assert jdagg.average_precision_at_k(["b", "a"], {"a"}) == 0.5
    assert jdagg.average_precision_at_k(["a", "b", "c", "d"], {"a", "c"}) == pytest.approx(
        (1.0 + 2.0 / 3.0) / 2.0
    )
    assert jdagg.mrr([(["x", "a"], {"a"}), (["a", "x"], {"a"})]) == 0.75


def test_synthetic_corpus():
    corpus = jdagg.generate_synthetic_corpus(8, 7)
    assert len(corpus) == 8
    assert corpus == jdagg.generate_synthetic_corpus(8, 7)
    for posting in corpus:
        assert posting["title_language"] == "english"
        assert 2 <= len(posting["skills"]) <= 5


def test_train_and_model_roundtrip(tmp_path):
    corpus = jdagg.generate_synthetic_corpus(16, 3)
    postings = [
        (p["id"], p["title"], jdagg.segment_description(p["description"]))
        for p in corpus
    ]
    model, losses = jdagg.train(
        postings, dim=16, layers=1, heads=2, lr=1e-3, batch_size=8, epochs=30, seed=5
    )
    assert len(losses) == 30 * 2
    assert losses[-1] < losses[0]

    segments = postings[0][2]
    f = model.aggregate_text(segments)
    assert f.shape == (16,)
    assert np.all(np.isfinite(f))

    # permutation invariance of the aggregator
    g = jdagg.encode_segments(segments, jdagg.HashEncoderConfig(dim=16, seed=5))
    f1 = model.aggregate(g)
    f2 = model.aggregate(g[::-1].copy())
    np.testing.assert_allclose(f1, f2, atol=1e-5)

    scores = model.attention_map(segments)
    assert scores.shape == (len(segments),)
    assert math.isclose(float(scores.sum()), 1.0, abs_tol=1e-6)

    path = tmp_path / "model.ckpt"
    model.save(str(path))
    loaded = jdagg.load_model(str(path))
    np.testing.assert_array_equal(model.aggregate(g), loaded.aggregate(g))


def test_train_embedded():
    rng = np.random.default_rng(3)
    titles = rng.normal(size=(12, 8)).astype(np.float32)
    descriptions = [
        rng.normal(size=(rng.integers(2, 5), 8)).astype(np.float32) for _ in range(12)
    ]
    model, losses = jdagg.train_embedded(
        titles, descriptions, layers=1, heads=2, batch_size=4, epochs=10, seed=2
    )
    assert len(losses) == 10 * 3
    f = model.aggregate(descriptions[0])
    assert f.shape == (8,)
    assert np.all(np.isfinite(f))


def test_pooling_helpers():
    m = np.array([[1.0, 3.0], [3.0, 1.0]], dtype=np.float32)
    np.testing.assert_array_equal(jdagg.mean_pool(m), np.array([2.0, 2.0], dtype=np.float32))
    np.testing.assert_array_equal(jdagg.max_pool(m), np.array([3.0, 3.0], dtype=np.float32))
