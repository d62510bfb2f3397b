"""Drive the whole pipeline through the CLI: ingest -> encode -> bootstrap ->
predict -> evaluate -> bench, in a temporary directory.

Every stage reads and writes the documented file formats, so any stage can be
swapped for an external system that speaks the same files (for example a
trained suggestion model emitting the predictions JSON-lines format).

Run: python demos/04_full_pipeline_cli.py
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from replyset.cli import main

rng = np.random.default_rng(7)
topics = {
    "coffee": ["espresso", "latte", "roast", "brew", "beans"],
    "cycling": ["pedal", "sprint", "gears", "saddle", "climb"],
    "garden": ["roses", "soil", "prune", "bloom", "seeds"],
}

workdir = Path(tempfile.mkdtemp(prefix="replyset_demo_"))
corpus = workdir / "train.jsonl"
with open(corpus, "w", encoding="utf-8") as fh:
    for i in range(120):
        name, words = list(topics.items())[i % 3]
        msg = " ".join(rng.choice(words, size=3))
        rep = " ".join(rng.choice(words, size=4)) + f" {name}{i % 5}"
        fh.write(json.dumps({"context": msg, "reply": rep}) + "\n")

pool = workdir / "pool.jsonl"
prefix = workdir / "emb"
boot = workdir / "boot.jsonl"
preds = workdir / "preds.jsonl"
report = workdir / "report.json"

for step in (
    ["ingest", "--corpus", corpus, "--out", pool],
    ["encode", "--corpus", corpus, "--pool", pool, "--out-prefix", prefix, "--dim", "128"],
    ["bootstrap", "--corpus", corpus, "--pool", pool, "--emb-prefix", prefix,
     "--out", boot, "--n", "30", "--m", "30", "--k", "3"],
    ["predict", "--strategy", "planner-online", "--corpus", corpus, "--pool", pool,
     "--emb-prefix", prefix, "--out", preds, "--n", "30", "--m", "30", "--k", "3"],
    ["evaluate", "--predictions", preds, "--test-corpus", corpus, "--out", report,
     "--label", "planner-online"],
    ["bench", "--corpus", corpus, "--pool", pool, "--emb-prefix", prefix,
     "--strategies", "matching,mmr,planner-online", "--batch-size", "16"],
):
    print(f"\n$ replyset {' '.join(str(s) for s in step)}")
    code = main([str(s) for s in step])
    assert code == 0, f"step failed: {step[0]}"

print(f"\nartifacts in {workdir}:")
for path in sorted(workdir.iterdir()):
    print(f"  {path.name:>22}  {path.stat().st_size:>8} bytes")

record = json.loads(boot.read_text(encoding="utf-8").splitlines()[1])
print("\nfirst bootstrap record:")
print(json.dumps(record, indent=2)[:400])
