"""
Saving corpora and importing CSV exports
========================================

Write a generated corpus to the binary container, read it back bit for bit,
and import a long-format CSV through a column manifest.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from wavshrink import GeneratorSpec, generate, import_csv, load, save
from wavshrink.data import ContainerError

tmp = Path(tempfile.mkdtemp())
ds = generate(GeneratorSpec(n_sessions=2, trials_per_class_per_session=2, n_channels=4, n_samples=128), seed=5)
save(ds, tmp / "corpus.lfpc")
back = load(tmp / "corpus.lfpc")
print("round trip exact:", back.equals(ds), "| header seed:", back.meta["seed"])

# Damaged files raise a specific error.
raw = (tmp / "corpus.lfpc").read_bytes()
(tmp / "broken.lfpc").write_bytes(raw[:-10])
try:
    load(tmp / "broken.lfpc")
except ContainerError as exc:
    print(type(exc).__name__, "-", exc)

# One row per time sample; rows of a trial are consecutive.
rows = ["trial,session,direction,task,t,left,right"]
for trial, (sess, d, task) in enumerate([(1, 2, "memory"), (1, 5, "delayed"), (2, 8, "memory")]):
    for t in range(4):
        rows.append(f"{trial},{sess},{d},{task},{t},{np.sin(t + trial):.4f},{np.cos(t):.4f}")
(tmp / "export.csv").write_text("\n".join(rows) + "\n")
manifest = {"trial": "trial", "session": "session", "direction": "direction", "task": "task",
            "channels": ["left", "right"]}
(tmp / "manifest.json").write_text(json.dumps(manifest))
imported = import_csv(tmp / "export.csv", tmp / "manifest.json")
print("imported", imported.samples.shape, "directions", imported.direction.tolist(),
      "tasks", [tr.task_name for tr in imported.trials])
