"""
Contrastive loss with the alignment term
========================================

A small batch of matched image/text embeddings, scored with the plain
symmetric loss and with the alignment regularizer switched on.
"""
import numpy as np

from cmaood import CmaConfig, PairedBatch, Temperature, clip_loss, cma_objective
from cmaood.losses import cma_objective_rewritten, log_marginal_estimate, loss_gradients

rng = np.random.default_rng(0)
images = rng.standard_normal((4, 8))
texts = images + 0.3 * rng.standard_normal((4, 8))   # texts sit near their images
batch = PairedBatch.from_raw(images, texts)
temp = Temperature.from_tau(0.07)

print("clip loss        ", clip_loss(batch, temp).total)
for lam in (0.0, 1e-3, 1e-1):
    cfg = CmaConfig(lam, temp)
    total = cma_objective(batch, cfg).total
    print(f"lam={lam:<6} total {total:.6f}   folded form {cma_objective_rewritten(batch, cfg):.6f}")

# The alignment term for image k is minus its log-partition over the batch texts.
out = cma_objective(batch, CmaConfig(0.1, temp))
print("log q(i_0) estimate", log_marginal_estimate(batch.images[0], batch.texts, temp))
print("-cma image term    ", -out.cma_image_terms[0])

# Gradients w.r.t. the raw vectors and the log inverse temperature.
d_img, d_txt, d_s = loss_gradients(batch, CmaConfig(0.1, temp))
print("gradient norms", np.linalg.norm(d_img), np.linalg.norm(d_txt), "d/ds", d_s)
