"""Acceptance suite: one test per criterion, run at the stated tolerances.

The summary section printed at the end of the session lists PASS/FAIL per
criterion. Heavy runs are marked ``slow``.
"""
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from wavshrink.cli import main
from wavshrink.data import (
    BadMagicError,
    HeaderError,
    ShapeError,
    TruncatedError,
    VersionMismatchError,
    generate,
    load,
    make_prototypes,
    preset,
    save,
)
from wavshrink.decoder import consistency_experiment
from wavshrink.learn import PipelineConfig, compute_features, cross_validate
from wavshrink.seqmodel import BesovBody, identity_estimator, rate_experiment
from wavshrink.shrink import soft_threshold, universal_estimate
from wavshrink.wavelet import DAUB4, DAUB8, HAAR, dwt, idwt

FIX = Path(__file__).parent / "fixtures"
EPS = [0.1, 0.05, 0.025, 0.0125]


@pytest.fixture(scope="module")
def signal_corpus():
    rng = np.random.default_rng(2024)
    return {n: rng.standard_normal((1000, n)) for n in (64, 512, 4096)}


@pytest.mark.criterion("perfect reconstruction (1000 signals x 3 families x N in {64, 512, 4096}, <= 1e-10, < 10 s)")
def test_perfect_reconstruction(signal_corpus):
    t0 = time.perf_counter()
    worst = 0.0
    for fam in (HAAR, DAUB4, DAUB8):
        for x in signal_corpus.values():
            worst = max(worst, float(np.abs(idwt(dwt(x, fam), fam) - x).max()))
    elapsed = time.perf_counter() - t0
    print(f"max reconstruction error {worst:.3e} in {elapsed:.2f} s")
    assert worst <= 1e-10
    assert elapsed < 10


@pytest.mark.criterion("Parseval isometry (same corpus, relative energy error <= 1e-9)")
def test_parseval(signal_corpus):
    worst = 0.0
    for fam in (HAAR, DAUB4, DAUB8):
        for x in signal_corpus.values():
            e = (x**2).sum(axis=1)
            ec = (dwt(x, fam).flatten() ** 2).sum(axis=1)
            worst = max(worst, float((np.abs(ec - e) / e).max()))
    print(f"max relative energy error {worst:.3e}")
    assert worst <= 1e-9


@pytest.mark.criterion("soft-threshold algebra (examples + 3 property suites, 1e4 cases each, < 5 s)")
def test_soft_threshold_algebra():
    t0 = time.perf_counter()
    assert soft_threshold(3, 1) == 2 and soft_threshold(-0.5, 1) == 0 and soft_threshold(-3, 1) == -2
    rng = np.random.default_rng(77)
    n = 10_000
    x = rng.standard_normal(n) * 10 ** rng.uniform(-3, 3, n)
    lam = np.abs(rng.standard_normal(n)) * 10 ** rng.uniform(-3, 3, n)
    y = soft_threshold(x, lam)
    # dead zone
    dead = np.abs(x) <= lam
    assert dead.sum() > 1000 and np.all(y[dead] == 0)
    live = ~dead
    np.testing.assert_allclose(np.abs(y[live]), np.abs(x[live]) - lam[live], rtol=1e-12, atol=1e-12)
    assert np.all(np.sign(y[live]) == np.sign(x[live]))
    # contraction: |S(a) - S(b)| <= |a - b|
    a, b = rng.standard_normal((2, n)) * 5
    lam2 = np.abs(rng.standard_normal(n))
    assert np.all(np.abs(soft_threshold(a, lam2) - soft_threshold(b, lam2)) <= np.abs(a - b) + 1e-12)
    assert np.all(np.abs(soft_threshold(a, lam2)) <= np.abs(a))
    # monotone in lambda
    lo = np.abs(rng.standard_normal(n))
    hi = lo + np.abs(rng.standard_normal(n))
    assert np.all(np.abs(soft_threshold(a, hi)) <= np.abs(soft_threshold(a, lo)))
    elapsed = time.perf_counter() - t0
    assert elapsed < 5


@pytest.mark.slow
@pytest.mark.criterion("sup-risk rate: slope 4/3 +- 0.25 for (p,q) in {(2,2),(1,1)}; identity control 2 +- 0.05 (< 5 min)")
@pytest.mark.parametrize("p", [2.0, 1.0])
def test_rate_check(p):
    body = BesovBody(1.0, p, p, 1.0)
    t0 = time.perf_counter()
    res = rate_experiment(body, EPS, universal_estimate, n_rep=2000, seed=20240, max_level=12)
    ctl = rate_experiment(body, EPS, identity_estimator, n_rep=2000, seed=20241, max_level=12)
    elapsed = time.perf_counter() - t0
    print(f"p=q={p:g}: slope {res.slope:.4f} CI {res.slope_ci}, identity slope {ctl.slope:.4f}, {elapsed:.1f} s")
    assert abs(res.slope - 4 / 3) <= 0.25
    assert abs(ctl.slope - 2.0) <= 0.05
    assert elapsed < 300


@pytest.mark.slow
@pytest.mark.criterion("decoder consistency bound on bumps (N in {64, 256, 1024}, 200 trials/class, < 5 min)")
def test_consistency_bound():
    spec = preset("paper-shape")
    t0 = time.perf_counter()
    res = consistency_experiment(lambda n: make_prototypes(spec, n), 0.5, [64, 256, 1024], 200, seed=11)
    elapsed = time.perf_counter() - t0
    for r in res.rows:
        print(f"N={r.N} s={r.s:.4f} error={r.empirical_max_error:.3f} bound={r.theorem1_bound:.3f}")
        assert r.empirical_max_error <= r.theorem1_bound + 3 * r.binomial_se
    assert res.rows[0].empirical_max_error >= 0.2
    assert res.rows[-1].empirical_max_error < res.rows[0].empirical_max_error
    assert elapsed < 300


@pytest.fixture(scope="module")
def paper_corpus():
    return generate(preset("paper-shape"), 7)


def _within_chance(acc, p, n):
    return abs(acc - p) <= 3 * math.sqrt(p * (1 - p) / n)


@pytest.mark.slow
@pytest.mark.criterion("paper-shape pipeline: direction >= 0.95, type >= 0.98, shuffled within 3 SE of chance (< 10 min)")
def test_pipeline_end_to_end(paper_corpus):
    t0 = time.perf_counter()
    out = {}
    for target, chance in (("direction", 1 / 8), ("type", 1 / 2)):
        cfg = PipelineConfig(target=target, family="haar", T=20, J=20, P=200)
        feats = compute_features(paper_corpus.samples, cfg)
        real = cross_validate(paper_corpus, cfg, "loso", 7, features=feats)
        null = cross_validate(paper_corpus, cfg, "loso", 7, features=feats, shuffle_labels=True)
        out[target] = (real.accuracy, null.accuracy, null.n_evaluated, chance)
        print(f"{target}: accuracy {real.accuracy:.4f}, shuffled {null.accuracy:.4f} (chance {chance:.3f})")
    elapsed = time.perf_counter() - t0
    assert out["direction"][0] >= 0.95
    assert out["type"][0] >= 0.98
    for acc_real, acc_null, n, chance in out.values():
        assert _within_chance(acc_null, chance, n)
    assert elapsed < 600


BUDGET = 64


def _compare(style, seed):
    ds = generate(preset(f"{style}-small"), seed)
    wav = PipelineConfig(features="wavelet", family="haar", T=BUDGET, J=BUDGET, lam=0.0, P=60)
    fou = PipelineConfig(features="fourier", K=BUDGET, P=60)
    return cross_validate(ds, wav, "loso", seed).accuracy, cross_validate(ds, fou, "loso", seed).accuracy


@pytest.mark.slow
@pytest.mark.criterion("wavelet vs Fourier: bumps within 3 points, spikes wavelet ahead by >= 5 points (< 10 min)")
def test_wavelet_vs_fourier():
    t0 = time.perf_counter()
    wb, fb = _compare("bumps", 3)
    ws, fs = _compare("spikes", 3)
    elapsed = time.perf_counter() - t0
    print(f"bumps: wavelet {wb:.4f} fourier {fb:.4f}; spikes: wavelet {ws:.4f} fourier {fs:.4f}; {elapsed:.1f} s")
    assert abs(wb - fb) <= 0.03
    assert ws - fs >= 0.05
    assert elapsed < 600


def _run_all(out: Path, threads: str, corpus: Path) -> dict:
    common = ["--seed", "13", "--threads", threads]
    gen = ["gen", *common, "-o", str(out / "c.lfpc"), "--sessions", "3", "--trials-per-class", "3",
           "--channels", "2", "--samples", "128", "--sigma", "0.4"]
    runs = [
        gen,
        ["xval", str(corpus), *common, "--P", "20", "--out", str(out / "xval")],
        ["xval", str(corpus), *common, "--P", "20", "--scheme", "kfold", "--shuffle-labels", "--out", str(out / "kf")],
        ["tune", str(corpus), *common, "--T-grid", "0,8", "--J-grid", "16,32", "--P-grid", "10,20",
         "--out", str(out / "tune")],
        ["rate", *common, "--n-rep", "100", "--max-level", "7", "--eps", "0.1,0.05,0.025", "--no-check",
         "--out", str(out / "rate")],
        ["decode", *common, "--sigma", "0.5", "--grid", "64,128", "--trials", "50", "--out", str(out / "decode")],
    ]
    for argv in runs:
        assert main(argv) in (0, 3), argv
    return {
        str(p.relative_to(out)): p.read_bytes()
        for p in sorted(out.rglob("*"))
        if p.is_file() and p.suffix in (".csv", ".json", ".lfpc")
    }


@pytest.mark.criterion("CLI determinism: byte-identical CSV/JSON across reruns and --threads values")
def test_cli_determinism(tmp_path):
    corpus = tmp_path / "input.lfpc"
    assert main(["gen", "--seed", "5", "-o", str(corpus), "--sessions", "3", "--trials-per-class", "3",
                 "--channels", "2", "--samples", "128", "--sigma", "0.4"]) == 0
    a = _run_all(tmp_path / "a", "1", corpus)
    b = _run_all(tmp_path / "b", "1", corpus)
    c = _run_all(tmp_path / "c", "4", corpus)
    assert len(a) >= 15
    assert a == b
    assert a == c


@pytest.mark.criterion("container round-trip on 1440 trials plus every malformed-file fixture")
def test_container_roundtrip(paper_corpus, tmp_path):
    assert len(paper_corpus) == 1440
    path = tmp_path / "corpus.lfpc"
    save(paper_corpus, path)
    back = load(path)
    assert back.equals(paper_corpus)
    assert back.samples.tobytes() == paper_corpus.samples.tobytes()
    expected = {
        "bad_magic.lfpc": BadMagicError,
        "bad_version.lfpc": VersionMismatchError,
        "truncated.lfpc": TruncatedError,
        "short_prefix.lfpc": TruncatedError,
        "extra_bytes.lfpc": ShapeError,
        "bad_header.lfpc": HeaderError,
    }
    for name, err in expected.items():
        with pytest.raises(err):
            load(FIX / name)
    assert len(load(FIX / "valid.lfpc")) == 32
