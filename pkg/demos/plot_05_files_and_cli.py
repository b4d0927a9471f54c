"""
Embedding files and the command line
====================================

Write an embedding file, read it back, and drive a few CLI subcommands
in-process.
"""
import json
import tempfile
from pathlib import Path

import numpy as np

from cmaood import read_embeddings, write_embeddings
from cmaood.cli import main

work = Path(tempfile.mkdtemp())
rng = np.random.default_rng(5)
rows = rng.standard_normal((6, 4))
rows /= np.linalg.norm(rows, axis=1, keepdims=True)

write_embeddings(rows, work / "ids.hseb", labels=[f"class{i}" for i in range(6)])
print((work / "ids.hseb").stat().st_size, "bytes =", 24, "+", 6 * 4 * 8)
back = read_embeddings(work / "ids.hseb")
print("round trip exact:", np.array_equal(back.rows, rows), back.labels[:2])

cands = rng.standard_normal((40, 4))
write_embeddings(cands / np.linalg.norm(cands, axis=1, keepdims=True), work / "cands.hseb")
main(["mine-negatives", "--id", str(work / "ids.hseb"), "--candidates", str(work / "cands.hseb"),
      "--m", "8", "--out", str(work / "neg.hseb")])
print((work / "neg.hseb.distances.csv").read_text().splitlines()[:3])

imgs = rng.standard_normal((30, 4))
write_embeddings(imgs / np.linalg.norm(imgs, axis=1, keepdims=True), work / "imgs.hseb")
main(["score", "--images", str(work / "imgs.hseb"), "--id-texts", str(work / "ids.hseb"),
      "--neg-texts", str(work / "neg.hseb"), "--method", "neglabel", "--tau", "0.1",
      "--out", str(work / "scores.csv")])
# the same file on both sides, so the report sits at chance level
main(["eval", "--id-scores", str(work / "scores.csv"), "--ood-scores", str(work / "scores.csv"),
      "--out", str(work / "report.json")])
print(json.loads((work / "report.json").read_text()))
