"""
The lambda comparison on synthetic data
=======================================

A reduced version of ``cmaood reproduce-synthetic``: two seeds instead of five.
Each seed pretrains once and fine-tunes twice from the same weights.
"""
from cmaood.experiment import ExperimentConfig, run_experiment, summarize

config = ExperimentConfig(seeds=(0, 1))
rows = run_experiment(config)
for r in rows:
    print(f"seed {r['seed']} lam {r['lam']:<6} val acc {r['id_val_acc']:.3f}  "
          f"NegLabel AUROC {r['neglabel_auroc']:.4f}  Uni-CMM {r['uni_cmm']:.4f}")

summary = summarize(rows, *config.lambdas)
print(summary["checks"])
