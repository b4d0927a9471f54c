"""
Negative labels and OoD scores
==============================

Mine negative labels from a candidate corpus, then compare MCM and NegLabel
scores for images near the ID texts and images elsewhere on the sphere.
"""
import numpy as np

from cmaood import EmbeddingSet, NegMiningConfig, ScoreConfig, mine_negatives, score_batch
from cmaood.metrics import detection_report

rng = np.random.default_rng(3)
d = 16


def unit(x):
    return x / np.linalg.norm(x, axis=1, keepdims=True)


id_texts = unit(rng.standard_normal((10, d)))
candidates = EmbeddingSet(unit(rng.standard_normal((300, d))),
                          [f"word{i}" for i in range(300)])

neg = mine_negatives(candidates, id_texts, NegMiningConfig(eta=0.05, m=50))
print("first negatives", neg.labels[:5])
print("distances      ", np.round(neg.distances[:5], 3))

id_images = unit(id_texts[rng.integers(0, 10, 200)] + 0.5 * rng.standard_normal((200, d)))
ood_images = unit(rng.standard_normal((200, d)))

for method in ("mcm", "neglabel"):
    s_id = score_batch(id_images, id_texts, neg.embeddings, method=method).scores
    s_ood = score_batch(ood_images, id_texts, neg.embeddings, method=method).scores
    rep = detection_report(s_id, s_ood)
    print(f"{method:9s} AUROC {rep.auroc:.3f}  FPR95 {rep.fpr_at_95_tpr:.3f}")

grouped = ScoreConfig(groups=10, grouping_enabled=True)
s_id = score_batch(id_images, id_texts, neg.embeddings, grouped).scores
s_ood = score_batch(ood_images, id_texts, neg.embeddings, grouped).scores
print(f"grouped   AUROC {detection_report(s_id, s_ood).auroc:.3f}")
