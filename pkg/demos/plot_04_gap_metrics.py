"""
Uniformity and alignment
========================

The seven gap numbers for two toy configurations: texts far from their images,
and texts pulled halfway towards them.
"""
import numpy as np

from cmaood import gap_report

rng = np.random.default_rng(4)
d = 8


def unit(x):
    return x / np.linalg.norm(x, axis=1, keepdims=True)


images = unit(rng.standard_normal((50, d)) + 2.0 * np.eye(d)[0])
far_texts = unit(images + 3.0 * np.eye(d)[1])        # a shared offset: a modality gap
near_texts = unit(images + 0.5 * np.eye(d)[1])
ood_texts = unit(rng.standard_normal((20, d)))

for name, texts in (("far", far_texts), ("near", near_texts)):
    rep = gap_report(images, texts, ood_texts)
    print(name, {k: round(v, 3) for k, v in rep.to_dict().items() if k != "format_version"})
