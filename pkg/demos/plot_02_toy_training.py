"""
Training the toy dual encoder
=============================

Generate a small synthetic dataset, pretrain on image/caption pairs from every
class, then fine-tune on the ID classes with and without the alignment term.
"""
from dataclasses import replace

from cmaood import SyntheticSpec, TrainConfig, generate_synthetic, id_accuracy
from cmaood.train import pretrain, train

spec = SyntheticSpec(num_id_classes=8, num_ood_classes=4, num_candidate_classes=40,
                     train_per_class=80, seed=1)
ds = generate_synthetic(spec)
print("train features", ds.id_train.shape, "prototypes", ds.id_prototypes.shape)

base, history = pretrain(ds, TrainConfig(batch_size=256, learning_rate=1e-2, max_epochs=30,
                                         patience=10))
print(f"pretrained for {len(history)} epochs, best val acc "
      f"{max(h['val_acc'] for h in history):.3f}")

fine = TrainConfig(batch_size=256, learning_rate=1e-3, max_epochs=10, patience=5)
for lam in (0.0, 1e-3):
    params, hist = train(ds, replace(fine, lam=lam), init=base)
    acc = id_accuracy(params, ds.id_test, ds.id_test_labels, ds.id_prototypes)
    print(f"lam={lam:<6} epochs {len(hist):2d}  last loss {hist[-1]['loss']:.4f}  "
          f"test acc {acc:.3f}  1/tau {params.temperature.inverse_scale:.1f}")
