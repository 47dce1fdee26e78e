"""Staged experiment pipeline: generate -> debias -> train -> audit.

Every stage reads and writes plain files in one output directory, so each step
can be re-run on its own. Artifact names:

    dataset.jsonl, dataset.meta.json     scored profiles + split + config
    transform.json, removal_audit.json   agnostic face transform and its audit
    model_<scenario>.json, loss_<scenario>.csv
    report_<scenario>.json, summary.csv
    comparison.md, comparison.csv        three-scenario top-k table
"""
from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import agnostic, fairness, model, probes, storage
from .config import RunConfig, format_config
from .datagen import N_CELLS, generate_dataset
from .errors import FairlensError, StateError
from .scoring import score_dataset

SCENARIOS = ("neutral", "biased-gender", "biased-ethnicity", "agnostic-gender", "agnostic-ethnicity")
DATASET = "dataset.jsonl"
TRANSFORM = "transform.json"


class StepError(FairlensError):
    """Wraps a failure inside ``full-run`` with the name of the failing step."""

    def __init__(self, step: str, error: FairlensError):
        super().__init__(f"{step}: {error}")
        self.step = step
        self.exit_code = error.exit_code


def _out(config: RunConfig) -> Path:
    return Path(config.out)


def _ensure_dir(path: Path):
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path}: {exc.strerror}") from exc


def _require(path: Path, step: str) -> Path:
    if not path.exists():
        raise StateError(f"{path} not found; run '{step}' first")
    return path


def _write_text(path: Path, text: str):
    path.write_text(text, encoding="utf-8")


def max_workers() -> int:
    """Parallelism cap from ``FAIRLENS_THREADS`` (default 1, i.e. serial)."""
    raw = os.environ.get("FAIRLENS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# --- generate --------------------------------------------------------------


def balance_summary(dataset) -> str:
    """Per-cell (gender, ethnicity, sector) counts for the train and val splits."""
    train = set(dataset.train_ids)
    counts = {}
    for p in dataset.profiles:
        tr, va = counts.get(p.cell, (0, 0))
        counts[p.cell] = (tr + 1, va) if p.id in train else (tr, va + 1)
    lines = ["gender ethnicity sector  train  val"]
    for cell in sorted(counts):
        lines.append("%6d %9d %6d  %5d %4d" % (*cell, *counts[cell]))
    lines.append(f"total train={len(dataset.train_ids)} val={len(dataset.val_ids)} cells={len(counts)}/{N_CELLS}")
    return "\n".join(lines)


def cmd_generate(config: RunConfig, force: bool = False, echo=print) -> Path:
    out = _out(config)
    _ensure_dir(out)
    path = out / DATASET
    if path.exists() and not force:
        raise StateError(f"{path} exists; pass --force to regenerate")
    dataset = generate_dataset(config.gen_config())
    g_spec, e_spec = config.bias_specs()
    score_dataset(dataset, config.score_weights(), g_spec, e_spec, seed=config.seed)
    digest = storage.save_dataset(dataset, path, {"config": config.provenance(), "debiased": False})
    stale_files = [out / TRANSFORM, out / "removal_audit.json", out / "summary.csv",
                   out / "comparison.md", out / "comparison.csv"]
    for s in SCENARIOS:
        stale_files += [out / f"model_{s}.json", out / f"loss_{s}.csv", out / f"report_{s}.json"]
    for stale in stale_files:
        if stale.exists():
            stale.unlink()
    echo(balance_summary(dataset))
    echo(f"wrote {path} ({len(dataset)} profiles, sha256 {digest[:12]})")
    return path


# --- debias ----------------------------------------------------------------


def cmd_debias(config: RunConfig, echo=print) -> Path:
    out = _out(config)
    data_path = _require(out / DATASET, "generate")
    dataset, meta = storage.load_dataset(data_path)
    tr, va = dataset.train_ids, dataset.val_ids
    faces, gender, ethnicity = dataset.faces(), dataset.genders(), dataset.ethnicities()
    rconf = config.removal_config()
    history = []
    transform = agnostic.train_agnostic_transform(faces[tr], gender[tr], ethnicity[tr], rconf, history)
    agnostic_faces = agnostic.apply_transform(transform, faces)
    for p, f in zip(dataset.profiles, agnostic_faces):
        p.agnostic_face = f
    audit = agnostic.removal_audit(transform, faces[tr], gender[tr], ethnicity[tr],
                                   faces[va], gender[va], ethnicity[va], seed=config.seed)
    t_meta = {"config": config.provenance(), "removal": agnostic.removal_config_dict(rconf),
              "loss_history": history}
    digest = agnostic.save_transform(transform, out / TRANSFORM, t_meta)
    _write_text(out / "removal_audit.json", json.dumps(audit, sort_keys=True, indent=2))
    meta = dict(meta, debiased=True, transform_sha256=digest)
    storage.save_dataset(dataset, data_path, {k: v for k, v in meta.items()
                                              if k not in ("generation", "train_ids", "val_ids", "n_profiles")})
    echo("fresh-probe accuracy (val): gender %.4f -> %.4f, ethnicity %.4f -> %.4f" % (
        audit["gender_probe_raw"], audit["gender_probe_agnostic"],
        audit["ethnicity_probe_raw"], audit["ethnicity_probe_agnostic"]))
    echo("orthogonal-subspace correlation %.4f, MAE %.4f (projection baseline %.4f)" % (
        audit["orthogonal_correlation"], audit["orthogonal_mae"], audit["orthogonal_mae_oracle"]))
    echo(f"wrote {out / TRANSFORM} (sha256 {digest[:12]})")
    return out / TRANSFORM


# --- train -----------------------------------------------------------------


def _load_for_scenario(config: RunConfig, scenario: model.ScenarioSpec):
    out = _out(config)
    dataset, meta = storage.load_dataset(_require(out / DATASET, "generate"))
    if scenario.agnostic_inputs and not (meta.get("debiased") and (out / TRANSFORM).exists()):
        raise StateError(f"scenario {scenario.name} needs agnostic faces; run 'debias' first")
    return dataset


def loss_csv(history) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "train_mae"])
    for i, loss in enumerate(history, start=1):
        w.writerow([i, repr(float(loss))])
    return buf.getvalue()


def cmd_train(config: RunConfig, scenario: model.ScenarioSpec, echo=print, dataset=None) -> Path:
    dataset = dataset if dataset is not None else _load_for_scenario(config, scenario)
    out = _out(config)
    params, history = model.train(dataset, scenario, config.train_config())
    path = out / f"model_{scenario.name}.json"
    digest = model.save_model(params, path, {"config": config.provenance(), "loss_history": history})
    _write_text(out / f"loss_{scenario.name}.csv", loss_csv(history))
    last = history[-1] if history else float("nan")
    echo(f"trained {scenario.name}: {len(history)} epochs, final train MAE {last:.5f} (sha256 {digest[:12]})")
    return path


# --- audit -----------------------------------------------------------------

SUMMARY_COLUMNS = ("scenario", "male_pct", "female_pct", "p_pct", "group1_pct", "group2_pct", "group3_pct",
                   "p1_pct", "p2_pct", "p3_pct", "kl_gender", "kl_ethnicity_mean")


def cmd_audit(config: RunConfig, scenario: model.ScenarioSpec, echo=print, dataset=None) -> Path:
    out = _out(config)
    mpath = _require(out / f"model_{scenario.name}.json", f"train --scenario {scenario.kind}")
    dataset = dataset if dataset is not None else _load_for_scenario(config, scenario)
    params, _ = model.load_model(mpath)
    predictions = model.predict_split(params, dataset, "val", scenario)
    results = probes.leakage_audit(params, dataset, scenario, seed=config.seed, epochs=config.probe_epochs)
    report = fairness.build_report(dataset, predictions, scenario.name, k=config.k,
                                   probe_results=results, config=config.provenance())
    path = out / f"report_{scenario.name}.json"
    _write_text(path, report.to_json())
    write_summary(out)
    row = report.summary_row()
    echo(f"{scenario.name}: top-{config.k} male {row['male_pct']}% female {row['female_pct']}% p%={row['p_pct']} "
         f"(4/5 flag {report.four_fifths['gender']}); groups {row['group1_pct']}/{row['group2_pct']}/"
         f"{row['group3_pct']}% p1/p2/p3={row['p1_pct']}/{row['p2_pct']}/{row['p3_pct']}; "
         f"KL gender {report.kl_gender:.4f} ethnicity {report.kl_ethnicity_mean:.4f}")
    for r in results:
        echo(f"  probe {r.kind:<10} {r.attribute:<9} val acc {r.val_accuracy:.4f} (chance {r.chance_level:.3f})")
    return path


def _load_reports(out: Path) -> dict:
    reports = {}
    for name in SCENARIOS:
        path = out / f"report_{name}.json"
        if path.exists():
            reports[name] = json.loads(path.read_text(encoding="utf-8"))
    return reports


def _row_from_doc(doc: dict) -> dict:
    report = fairness.FairnessReport(**doc)
    return report.summary_row()


def write_summary(out: Path) -> Path:
    """Rewrite ``summary.csv`` from every report present in ``out``."""
    rows = [_row_from_doc(doc) for doc in _load_reports(out).values()]
    columns = list(SUMMARY_COLUMNS)
    for row in rows:
        columns += [c for c in row if c not in columns]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    path = out / "summary.csv"
    _write_text(path, buf.getvalue())
    return path


# --- comparison table --------------------------------------------------------

COMPARISON_HEADER = ("Scenario", "Male", "Female", "p%", "Group 1", "Group 2", "Group 3", "p1%", "p2%", "p3%")
COMPARISON_ROWS = (("Neutral", "neutral", "neutral"),
                   ("Biased", "biased-gender", "biased-ethnicity"),
                   ("Agnostic", "agnostic-gender", "agnostic-ethnicity"))


def comparison_rows(reports: dict) -> list:
    """Top-k shares per scenario: gender columns from the gender-biased run,
    ethnicity columns from the ethnicity-biased run (neutral serves both)."""
    rows = []
    for label, g_name, e_name in COMPARISON_ROWS:
        if g_name not in reports or e_name not in reports:
            continue
        g, e = reports[g_name], reports[e_name]
        rows.append([label, g["gender_shares"]["male"], g["gender_shares"]["female"], g["p_gender"],
                     e["ethnicity_shares"]["group1"], e["ethnicity_shares"]["group2"],
                     e["ethnicity_shares"]["group3"], *e["p_ethnicity"]])
    return rows


def write_comparison(out: Path) -> tuple:
    rows = comparison_rows(_load_reports(out))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARISON_HEADER)
    w.writerows(rows)
    _write_text(out / "comparison.csv", buf.getvalue())

    md = ["| " + " | ".join(COMPARISON_HEADER) + " |", "|" + "---|" * len(COMPARISON_HEADER)]
    for row in rows:
        md.append("| " + " | ".join([row[0]] + [f"{v:.2f}" for v in row[1:]]) + " |")
    md.append("")
    md.append("Shares are percentages of the top-k; p-scores follow the min-ratio definition "
              "(p1: G1 vs G2, p2: G1 vs G3, p3: G2 vs G3).")
    _write_text(out / "comparison.md", "\n".join(md) + "\n")
    return out / "comparison.md", out / "comparison.csv"


# --- full run ----------------------------------------------------------------


def _train_worker(args):
    config, name = args
    cmd_train(config, model.ScenarioSpec.parse(name), echo=lambda *_: None)
    return name


def _step(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except FairlensError as exc:
        raise StepError(name, exc) from exc


def cmd_full_run(config: RunConfig, force: bool = False, echo=print) -> Path:
    out = _out(config)
    if out.exists() and any(out.iterdir()) and not force:
        raise StateError(f"output directory {out} is not empty; pass --force to overwrite")
    _ensure_dir(out)
    _write_text(out / "config.txt", format_config(config, include_out=False))
    _step("generate", cmd_generate, config, force=True, echo=echo)
    _step("debias", cmd_debias, config, echo=echo)

    workers = min(max_workers(), len(SCENARIOS))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for name in pool.map(_train_worker, [(config, s) for s in SCENARIOS]):
                echo(f"trained {name}")
    else:
        dataset, _ = storage.load_dataset(out / DATASET)
        for name in SCENARIOS:
            _step(f"train {name}", cmd_train, config, model.ScenarioSpec.parse(name), echo=echo, dataset=dataset)
    dataset, _ = storage.load_dataset(out / DATASET)
    for name in SCENARIOS:
        _step(f"audit {name}", cmd_audit, config, model.ScenarioSpec.parse(name), echo=echo, dataset=dataset)
    md, _ = write_comparison(out)
    echo(md.read_text(encoding="utf-8"))
    return out


def artifact_hashes(out) -> dict:
    """sha256 of every file in ``out`` (used to check run-to-run determinism)."""
    out = Path(out)
    return {p.name: storage.file_sha256(p) for p in sorted(out.iterdir()) if p.is_file()}

