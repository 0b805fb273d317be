"""
Fast-gradient-method perturbations on the embedding layer
=========================================================

The adversarial step perturbs the embedded input by epsilon along the
direction that hurts the log-likelihood most, re-runs the forward pass
with the same dropout masks, and mixes the two gradient sets. Here we
look at the raw geometry, then at clean-vs-adversarial loss on a model
that has actually learned something.
"""

import numpy as np

from newsclf import pipeline, synthdata
from newsclf.advtrain import AdvConfig, Batch, adversarial_training_step, fgm_perturbation
from newsclf.pipeline import RunConfig
from newsclf.textprep import clean_dataset, load_stopwords

# geometry first: the perturbation is -eps * g / ||g||
g = np.array([[3.0, 4.0]])
rec = fgm_perturbation(g, epsilon=1.0)
print(f"gradient {g[0]}, epsilon 1 -> r_adv {rec.r_adv[0]}, norm "
      f"{np.linalg.norm(rec.r_adv):.6f}")

# and it is the worst same-norm direction for the linearized objective
rng = np.random.default_rng(0)
worst = float((rec.r_adv * g).sum())
others = []
for _ in range(1000):
    r = rng.normal(size=g.shape)
    r /= np.linalg.norm(r)
    others.append(float((r * g).sum()))
print(f"linearized change: fgm {worst:+.4f}, best random of 1000 {min(others):+.4f}")

# now on a trained model
train, val = synthdata.separable_corpus(200, 50, seed=0)
cfg = RunConfig.from_dict({
    "seed": 1,
    "vocab": {"target_size": 200},
    "model": {"max_len": 24, "hidden_dim": 32, "num_layers": 1,
              "num_heads": 2, "ff_dim": 64, "dropout": 0.1},
    "train": {"batch_size": 64, "eval_batch_size": 128, "epochs": 6,
              "lr": 0.01, "warmup": 0.3, "patience": 20, "rounds": 1},
    "toggles": {"new_tokens": False, "heated_loss": False,
                "adversarial": False, "fusion": False},
})
res = pipeline.train(cfg, train, val)
print(f"\ntrained baseline: validation accuracy {res.best_report.accuracy:.3f}")

ds = pipeline.encode_dataset(clean_dataset(train, load_stopwords()),
                             res.vocab, res.model.config.max_len)
batch = Batch(ids=ds.ids[:32], mask=ds.mask[:32], labels=ds.labels[:32])
print("\nclean vs adversarial loss, growing budget")
for eps in (0.0, 0.1, 0.5, 2.0):
    out = adversarial_training_step(
        res.model, batch, alpha=1.0,
        adv=AdvConfig(enabled=True, epsilon=eps, combine_weight=0.5),
        dropout_seed=7)
    print(f"  epsilon {eps:>3}: clean {out.clean_loss:.6f}  adv {out.adv_loss:.6f}")
