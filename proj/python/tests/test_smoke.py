#!/usr/bin/env python3
"""Smoke tests for the gpse python module.

Usage: test_smoke.py <dir-containing-module>
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, sys.argv[1] if len(sys.argv) > 1 else ".")

import numpy as np

import gpse


def test_stft_roundtrip():
    rng = np.random.default_rng(0)
    x = (rng.uniform(-0.5, 0.5, 4000)).astype(np.float64)
    cfg = gpse.StftConfig()
    spec = gpse.stft(x, 8000, cfg)
    assert spec.shape[1] == 128
    back = gpse.istft(spec, cfg, 8000)
    w = cfg.window_len
    err = np.max(np.abs(back[w:-w] - x[w : len(back) - w]))
    assert err < 1e-6, err


def test_compress_inverse():
    rng = np.random.default_rng(1)
    spec = (rng.normal(size=(10, 16)) + 1j * rng.normal(size=(10, 16)))
    comp = gpse.compress(spec, 0.5, 0.33)
    back = gpse.decompress(comp, 0.5, 0.33)
    assert np.max(np.abs(back - spec)) < 1e-9


def test_sde_values():
    p = gpse.SdeParams()
    assert abs(gpse.diffusion_coeff(1.0, p) - 0.5 * math.sqrt(2 * math.log(10))) < 1e-12
    var = 0.0025 * (100 - math.exp(-3)) * math.log(10) / (1.5 + math.log(10))
    assert abs(gpse.kernel_std(1.0, p) - math.sqrt(var)) < 1e-12

    x0 = np.full((2, 3), 1.0 + 0j)
    y = np.zeros((2, 3), dtype=complex)
    mu = gpse.kernel_mean(x0, y, 1.0, p)
    assert abs(mu[0, 0].real - math.exp(-1.5)) < 1e-12

    r1, r2 = gpse.Rng(7), gpse.Rng(7)
    xt1, z1 = gpse.sample_perturbed(x0, y, 0.5, p, r1)
    xt2, z2 = gpse.sample_perturbed(x0, y, 0.5, p, r2)
    assert np.array_equal(xt1, xt2) and np.array_equal(z1, z2)

    score = gpse.kernel_score(xt1, x0, y, 0.5, p)
    sigma = gpse.kernel_std(0.5, p)
    assert gpse.dsm_loss(score, z1, sigma) < 1e-18


def test_metrics():
    rng = np.random.default_rng(2)
    ref = rng.normal(size=1024) * 0.3
    db, capped = gpse.si_sdr(ref, ref)
    assert capped and db == 60.0
    db2, capped2 = gpse.si_sdr(2.0 * ref, ref)
    assert capped2

    n = rng.normal(size=1024) * 0.3
    n -= (n @ ref) / (ref @ ref) * ref
    n *= math.sqrt(0.1 * (ref @ ref) / (n @ n))
    db3, capped3 = gpse.si_sdr(ref + n, ref)
    assert not capped3 and abs(db3 - 10.0) < 1e-6


def test_synth():
    cfg = gpse.DataConfig()
    cfg.duration_s = 0.5
    w1 = gpse.gen_clean(gpse.Rng(3), cfg)
    w2 = gpse.gen_clean(gpse.Rng(3), cfg)
    assert np.array_equal(w1, w2)
    assert abs(np.max(np.abs(w1)) - 0.7) < 1e-9

    noise = gpse.gen_noise(gpse.Rng(4), "white", len(w1), 8000)
    noisy, scaled, renorm = gpse.mix_at_snr(w1, noise, 5.0)
    assert noisy.shape == w1.shape and 0 < renorm <= 1.0


def test_model_and_sampler():
    nc = gpse.NetworkConfig()
    nc.base_channels = 4
    nc.depth = 2
    nc.time_embed_dim = 16
    nc.variant = "gp"
    model = gpse.ScoreModel(nc, seed=5)
    assert model.has_pred_decoder()
    assert model.param_count() > 0

    rng = np.random.default_rng(6)
    y = (rng.normal(size=(6, 8)) + 1j * rng.normal(size=(6, 8))) * 0.3
    x_t = y.copy()

    # zero-initialized heads
    s = model.score(x_t, y, 0.5)
    assert np.all(s == 0)

    cfg = gpse.SamplerConfig()
    cfg.n_steps = 2
    cfg.variant = "gp-unified"
    cfg.seed = 9
    out = model.enhance_spec(y, cfg)
    assert out.shape == y.shape and np.all(np.isfinite(out.view(float)))

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "m.ckpt")
        model.save_checkpoint(path, False)
        loaded = gpse.ScoreModel.load_checkpoint(path)
        out2 = loaded.enhance_spec(y, cfg)
        assert np.array_equal(out, out2)


def test_wav_io():
    rng = np.random.default_rng(8)
    x = rng.uniform(-0.9, 0.9, 2000)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "t.wav")
        gpse.save_wav(x, 8000, path)
        back, sr = gpse.load_wav(path)
        assert sr == 8000
        assert np.max(np.abs(back - x)) <= 2.0 ** -15


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for t in tests:
        t()
        print(f"ok {t.__name__}")
    print(f"{len(tests)} python smoke tests passed")


if __name__ == "__main__":
    main()
