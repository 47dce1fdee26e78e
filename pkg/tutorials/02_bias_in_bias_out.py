"""
Bias in, bias out
=================

Train the multimodal scoring network twice on the same profiles: once on the
blind target, once on the gender-penalised target. The second network finds
gender in the face and bio channels on its own, and the audit shows it both
in who gets selected and in what a probe can read off the hidden layer.

Takes a few seconds on one core.
"""
from fairlens.datagen import GenConfig, generate_dataset
from fairlens.fairness import build_report
from fairlens.model import ScenarioSpec, TrainConfig, predict_split, train
from fairlens.probes import leakage_audit
from fairlens.scoring import score_dataset

ds = score_dataset(generate_dataset(GenConfig(n_profiles=4800, seed=11)))
cfg = TrainConfig(epochs=12, seed=11)

for scenario in (ScenarioSpec("neutral"), ScenarioSpec("biased", "gender")):
    params, history = train(ds, scenario, cfg)
    preds = predict_split(params, ds, "val")
    probes = leakage_audit(params, ds, seed=11, kinds=("logistic",), epochs=30)
    rep = build_report(ds, preds, scenario.name, k=200, probe_results=probes)
    gender_probe = next(r for r in probes if r.attribute == "gender")
    print(f"{scenario.name:14s} final MAE {history[-1]:.4f} | top-200 male {rep.gender_shares['male']:5.1f}% "
          f"p%={rep.p_gender:6.2f} (4/5 violated: {rep.four_fifths['gender']}) | "
          f"KL gender {rep.kl_gender:.3f} | gender probe {gender_probe.val_accuracy:.3f}")
