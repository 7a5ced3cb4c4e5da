from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfdetect.channel import build_channel_stats, crandn, far_field_stat
from cfdetect.geometry import DeploymentConfig, sample_deployment
from cfdetect.likelihood import build_local_model
from cfdetect.signals import (
    QPSK,
    dump_signals,
    generate_signatures,
    load_signals,
    sample_activity,
    synthesize_received,
    unvec_received,
    vec_received,
)


def test_signatures_are_unit_modulus_qpsk():
    S = generate_signatures(30, 6, np.random.default_rng(0))
    assert S.shape == (6, 30)
    assert np.all(np.isin(S, QPSK))
    np.testing.assert_allclose(np.abs(S), 1.0)
    np.testing.assert_allclose(np.sum(np.abs(S) ** 2, axis=0), 6.0)


def test_signature_symbol_histogram():
    S = generate_signatures(1000, 100, np.random.default_rng(1)).ravel()
    n = S.size
    sigma = np.sqrt(0.25 * 0.75 / n)
    for sym in QPSK:
        assert abs(np.mean(np.isclose(S, sym)) - 0.25) < 5 * sigma


def test_signatures_deterministic():
    a = generate_signatures(10, 4, np.random.default_rng(5))
    b = generate_signatures(10, 4, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)


def test_activity_counts():
    rng = np.random.default_rng(0)
    assert sample_activity(100, 0.1, rng).sum() == 10
    assert sample_activity(50, 0.0, rng).sum() == 0
    assert sample_activity(50, 1.0, rng).sum() == 50
    a = sample_activity(1000, 0.3, rng, mode="bernoulli")
    assert set(np.unique(a)) <= {0, 1}
    with pytest.raises(ValueError):
        sample_activity(10, 1.5, rng)
    with pytest.raises(ValueError):
        sample_activity(10, 0.5, rng, mode="other")


@given(st.integers(1, 8), st.integers(1, 8))
def test_vec_roundtrip(L, K):
    Y = np.arange(L * K).reshape(L, K) + 1j
    y = vec_received(Y)
    assert y[1 * L + 0] == Y[0, 1] if K > 1 else True
    np.testing.assert_array_equal(unvec_received(y, L), Y)


def test_vec_of_outer_product_is_kron():
    rng = np.random.default_rng(2)
    s = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    h = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    np.testing.assert_allclose(vec_received(np.outer(s, h)), np.kron(h, s))


def test_noise_only_energy():
    stats = [[far_field_stat(1.0, 4) for _ in range(3)]]
    S = generate_signatures(3, 5, np.random.default_rng(0))
    rng = np.random.default_rng(1)
    e = [np.sum(np.abs(synthesize_received(stats, S, np.zeros(3, int), rng)[0]) ** 2)
         for _ in range(4000)]
    # each |y_i|^2 is Exp(1); the sum of 20 has variance 20
    assert abs(np.mean(e) - 20) < 5 * np.sqrt(20 / 4000)


def test_single_far_field_device_noiseless():
    g, K, L = 2.5, 4, 3
    stats = [[far_field_stat(g, K), far_field_stat(1.0, K)]]
    S = generate_signatures(2, L, np.random.default_rng(0))
    y = synthesize_received(stats, S, np.array([1, 0]), np.random.default_rng(7), noise=False)[0]
    # only the active device draws from the stream
    h = np.sqrt(g) * crandn(np.random.default_rng(7), K)
    np.testing.assert_allclose(y, vec_received(np.outer(S[:, 0], h)))
    np.testing.assert_allclose(y, np.kron(h, S[:, 0]))


def test_received_covariance_matches_model():
    dep = sample_deployment(DeploymentConfig(M=1, N=4, K=3, L_m=2, lambda_c=0.3),
                            np.random.default_rng(4))
    near = np.array([[True, False, True, False]])
    stats = build_channel_stats(dep, near_mask=near)
    # rescale to unit LoS gain so signal and noise are comparable
    stats = [[replace(s, mean=s.mean / np.sqrt(s.g), factor=s.factor / np.sqrt(s.g))
              if s.near else far_field_stat(1.0, s.K) for s in stats[0]]]
    S = generate_signatures(4, 2, np.random.default_rng(5))
    a = np.array([1, 1, 0, 1])
    model = build_local_model(stats[0], S)
    rng = np.random.default_rng(6)
    n = 10_000
    Y = np.array([synthesize_received(stats, S, a, rng)[0] for _ in range(n)])
    mean = model.mean(a)
    np.testing.assert_allclose(Y.mean(axis=0), mean, atol=5 * np.sqrt(4 / n))
    E = Y - mean
    cov = E.T @ E.conj() / n
    C = model.covariance(a.astype(float))
    scale = np.sqrt(np.outer(np.real(np.diag(C)), np.real(np.diag(C))))
    assert np.max(np.abs(cov - C) / scale) < 6 / np.sqrt(n)


def test_dump_load_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    S = generate_signatures(5, 3, rng)
    a = sample_activity(5, 0.4, rng)
    ys = [rng.standard_normal(6) + 1j * rng.standard_normal(6) for _ in range(2)]
    path = tmp_path / "sig.bin"
    dump_signals(path, S, a, ys)
    S2, a2, ys2 = load_signals(path)
    np.testing.assert_array_equal(S2, S)
    np.testing.assert_array_equal(a2, a)
    for y, y2 in zip(ys, ys2):
        np.testing.assert_array_equal(y, y2)
    raw = path.read_bytes()
    assert raw[:4] == b"CFAD" and len(raw) == 20 + 16 * 15 + 5 + 2 * 16 * 6


def test_load_rejects_foreign_file(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(ValueError):
        load_signals(p)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_received_length_and_finite(seed):
    dep = sample_deployment(DeploymentConfig(M=2, N=6, K=4, L_m=2), np.random.default_rng(seed))
    stats = build_channel_stats(dep)
    rng = np.random.default_rng(seed)
    S = generate_signatures(6, 3, rng)
    ys = synthesize_received(stats, S, sample_activity(6, 0.5, rng), rng)
    assert len(ys) == 2
    for y in ys:
        assert y.shape == (12,) and np.all(np.isfinite(y))
