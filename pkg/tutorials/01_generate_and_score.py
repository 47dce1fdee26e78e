"""
Synthetic candidate profiles and their target scores
=====================================================

Generate a small balanced pool of profiles, look at what each channel holds,
and check what the screening audit says about the *target* scores themselves
before any model is trained.

Run with ``python3 tutorials/01_generate_and_score.py``.
"""
from collections import Counter

import numpy as np

from fairlens.datagen import GenConfig, generate_dataset
from fairlens.fairness import build_report
from fairlens.scoring import score_dataset

# 2400 profiles: 100 per gender x ethnicity x sector cell, 400 per gender x ethnicity
ds = score_dataset(generate_dataset(GenConfig(n_profiles=2400, seed=7)))
print("cells:", Counter((p.gender, p.ethnicity) for p in ds.profiles))
print("train/val:", len(ds.train_ids), len(ds.val_ids))

# one profile, channel by channel
p = ds.profiles[0]
print("\nname:", p.name, "| occupation", p.occupation_id, "| sector", p.sector_id)
print("bio:        ", " ".join(p.bio))
print("blinded bio:", " ".join(p.blind_bio))
print("competencies:", p.competencies)
print("face (first 5 of 20):", np.round(p.face[:5], 3), "norm", round(float(np.linalg.norm(p.face)), 6))
print("scores: blind %.3f  gender-biased %.3f  ethnicity-biased %.3f" % (p.score_u, p.score_g, p.score_e))

# Audit the targets directly: the blind score should pass the 4/5 rule,
# the gender-penalised one should not.
for key in ("score_u", "score_g", "score_e"):
    preds = {i: getattr(ds.profiles[i], key) for i in ds.val_ids}
    rep = build_report(ds, preds, key, k=100)
    print(f"{key}: top-100 male {rep.gender_shares['male']}%  p%={rep.p_gender}  "
          f"ethnicity p%={rep.p_ethnicity}  KL gender={rep.kl_gender:.3f}")
