"""
Wavelet features, PCA and LDA
=============================

Generate a small multi-session corpus, cross-validate the wavelet pipeline by
holding out one session at a time, compare it with truncated Fourier
features, and run a short grid search.
"""

import numpy as np

from wavshrink import PipelineConfig, cross_validate, generate, grid_search, preset

ds = generate(preset("spikes-small"), seed=3)
print(f"{len(ds)} trials, {ds.n_channels} channels x {ds.n_samples} samples, "
      f"sessions {np.unique(ds.session).tolist()}")

wav = PipelineConfig(features="wavelet", family="haar", T=64, J=64, P=60)
fou = PipelineConfig(features="fourier", K=64, P=60)
for cfg in (wav, fou):
    rep = cross_validate(ds, cfg, "loso", seed=3)
    print(f"{cfg.features:8s} accuracy {rep.accuracy:.3f}")

# Per-class view of the wavelet run.
rep = cross_validate(ds, wav, "loso", seed=3)
print("per-direction accuracy:", np.round(rep.per_class_accuracy, 2).tolist())
print(rep.confusion_csv())

# Label-shuffled control lands near 1/8.
null = cross_validate(ds, wav, "loso", seed=3, shuffle_labels=True)
print(f"shuffled labels: {null.accuracy:.3f}")

res = grid_search(ds, T=[16, 64], J=[64, 128], lam=[0.0], P=[30, 60], seed=3)
print(res.to_csv())
print("best:", res.best.T, res.best.J, res.best.P, f"{res.best_accuracy:.3f}")
