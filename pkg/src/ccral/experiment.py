"""Repeated train/validation/test comparison of Standard, Counterfactual and CCRAL.

Each repeat ``r`` derives its own seed from the master seed, splits the raw
table (stratified by label), fits the encoder on the training part only and
runs every requested method on the same partition and encoding. Reports are
JSON with sorted keys and no timestamps, so identical inputs give identical
bytes.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._seeding import derive_seed
from .counterfactual import build_counterfactual_set
from .data import (
    BUILTIN_SCHEMAS,
    SplitSpec,
    builtin_schema,
    encode_labels,
    fit_encoder,
    load_csv,
    load_schema,
    split_indices,
    transform,
)
from .exceptions import CCRALError, DataError, MalformedReport
from .linear import TrainConfig, predict_score
from .metrics import evaluate
from .trainer import make_margin_grid, run_ccral, run_counterfactual_all, run_standard

log = logging.getLogger(__name__)

METHODS = ("standard", "counterfactual", "ccral")
AGGREGATE_TOL = 1e-12


@dataclass(frozen=True)
class ExperimentConfig:
    data_path: str
    schema_path: str
    methods: tuple[str, ...] = METHODS
    K: int = 10
    repeats: int = 5
    split: tuple[float, float, float] = (0.6, 0.2, 0.2)
    master_seed: int = 0
    classifier: TrainConfig = field(default_factory=TrainConfig)
    output_path: str | None = None

    def __post_init__(self):
        methods = tuple(self.methods)
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "split", tuple(float(f) for f in self.split))
        if not methods:
            raise ValueError("at least one method is required")
        unknown = [m for m in methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown method(s) {unknown}; choose from {METHODS}")
        if self.repeats < 1 or self.K < 1:
            raise ValueError("repeats and K must be >= 1")
        if len(self.split) != 3:
            raise ValueError("split needs three fractions")
        SplitSpec(*self.split)

    def to_dict(self):
        return {
            "data_path": str(self.data_path),
            "schema_path": str(self.schema_path),
            "methods": list(self.methods),
            "K": self.K,
            "repeats": self.repeats,
            "split": list(self.split),
            "master_seed": self.master_seed,
            "classifier": self.classifier.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        clf = doc.pop("classifier", None)
        if isinstance(clf, str):
            clf = {"loss_kind": clf}
        classifier = TrainConfig(**(clf or {}))
        known = {"data_path", "schema_path", "methods", "K", "repeats", "split",
                 "master_seed", "output_path"}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(classifier=classifier, **doc)


def resolve_schema(schema_path):
    """A schema file path, or the bare name of a shipped schema."""
    p = Path(schema_path)
    if not p.exists() and str(schema_path) in BUILTIN_SCHEMAS:
        return builtin_schema(str(schema_path))
    return load_schema(p)


def _dataset_name(schema_path):
    name = Path(str(schema_path)).name
    for suffix in (".json", ".schema"):
        name = name.removesuffix(suffix)
    return name


def _aggregate(values):
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return {"mean": None, "std": None}
    return {"mean": float(arr.mean()), "std": float(arr.std())}


def aggregates_for(entries):
    return {
        "test_accuracy": _aggregate([e["test_accuracy"] for e in entries]),
        "test_auc": _aggregate([e["test_auc"] for e in entries]),
    }


def _run_repeat(r, cfg, raw, schema, labels):
    seed_r = derive_seed(cfg.master_seed, "repeat", r)
    spec = SplitSpec(*cfg.split, seed=derive_seed(seed_r, "split"), stratify=True)
    tr_idx, va_idx, te_idx = split_indices(labels, spec)
    encoder = fit_encoder(raw.take(tr_idx), schema)
    train_ds = transform(encoder, raw.take(tr_idx))
    val_ds = transform(encoder, raw.take(va_idx))
    test_ds = transform(encoder, raw.take(te_idx))
    clf = replace(cfg.classifier, seed=derive_seed(seed_r, "train"))

    cfs = None
    if "counterfactual" in cfg.methods or "ccral" in cfg.methods:
        cfs = build_counterfactual_set(train_ds)

    out = {}
    for method in cfg.methods:
        extra = {}
        if method == "standard":
            model = run_standard(train_ds, clf)
        elif method == "counterfactual":
            model = run_counterfactual_all(train_ds, clf, cfs)
        else:
            model, trace = run_ccral(train_ds, val_ds, clf, make_margin_grid(cfg.K), cfs)
            extra = {"selected_alpha": trace.selected_alpha, "trace": trace.to_dict()["grid"]}
        res = evaluate(test_ds.y, predict_score(model, test_ds.X))
        out[method] = {"repeat": r, "repeat_seed": seed_r, "test_accuracy": res.accuracy,
                       "test_auc": res.auc, **extra}
    sizes = {"train": len(tr_idx), "val": len(va_idx), "test": len(te_idx),
             "encoded_dim": encoder.n_features}
    return out, sizes


def run_experiment(cfg: ExperimentConfig, version=None) -> dict:
    """Run every repeat and return the report document.

    A repeat that raises is recorded under ``errors`` and the remaining
    repeats still run. Loading failures propagate.
    """
    if version is None:
        from . import __version__ as version

    schema = resolve_schema(cfg.schema_path)
    raw = load_csv(cfg.data_path, schema)
    labels = encode_labels(raw, schema)

    results = {m: [] for m in cfg.methods}
    errors = {}
    sizes = None
    for r in range(cfg.repeats):
        try:
            out, sz = _run_repeat(r, cfg, raw, schema, labels)
        except CCRALError as exc:
            log.warning("repeat %d failed: %s", r, exc)
            errors[str(r)] = {"type": type(exc).__name__, "message": str(exc),
                              "kind": "data" if isinstance(exc, DataError) else "training"}
            continue
        sizes = sizes or sz
        for m in cfg.methods:
            results[m].append(out[m])

    return {
        "tool": {"name": "ccral", "version": version},
        "config": cfg.to_dict(),
        "dataset": {
            "name": _dataset_name(cfg.schema_path),
            "N": raw.n_rows,
            "M": len(schema.feature_columns),
            "n_dropped": raw.n_dropped,
            "treatment": schema.treatment,
            "label": schema.label,
            "split_sizes": sizes,
        },
        "methods": {m: {"entries": results[m], "aggregates": aggregates_for(results[m])}
                    for m in cfg.methods},
        "errors": errors,
    }


def dumps_report(report) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def write_report(report, path):
    Path(path).write_text(dumps_report(report), encoding="utf-8")


def load_report(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as exc:
        raise MalformedReport(f"cannot read report {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedReport(f"report {path} is not valid JSON: {exc}") from exc
    check_report(doc)
    return doc


def check_report(doc):
    """Structural check plus re-derivation of every stored aggregate."""
    if not isinstance(doc, dict) or not isinstance(doc.get("methods"), dict):
        raise MalformedReport("report lacks a 'methods' mapping")
    for name, block in doc["methods"].items():
        try:
            entries = block["entries"]
            stored = block["aggregates"]
            fresh = aggregates_for(entries)
        except (KeyError, TypeError) as exc:
            raise MalformedReport(f"method {name!r}: malformed block ({exc!r})") from exc
        for metric, agg in fresh.items():
            for stat, value in agg.items():
                old = stored.get(metric, {}).get(stat) if isinstance(stored.get(metric), dict) else None
                if value is None and old is None:
                    continue
                if value is None or old is None or abs(value - old) > AGGREGATE_TOL:
                    raise MalformedReport(
                        f"method {name!r}: stored {metric}.{stat}={old} but entries give {value}")


def render_report(doc) -> str:
    """Plain-text table of per-method mean +- std accuracy and AUC."""
    check_report(doc)
    ds = doc.get("dataset", {})
    lines = [f"dataset: {ds.get('name', '?')}  N={ds.get('N', '?')}  M={ds.get('M', '?')}  "
             f"treatment={ds.get('treatment', '?')}"]
    header = f"{'method':<16}{'accuracy':>20}{'AUC':>20}{'repeats':>9}  selected alpha"
    lines += [header, "-" * len(header)]
    order = [m for m in METHODS if m in doc["methods"]]
    order += [m for m in doc["methods"] if m not in METHODS]
    for m in order:
        block = doc["methods"][m]
        entries = block["entries"]
        agg = block["aggregates"]

        def cell(metric):
            a = agg[metric]
            if a["mean"] is None:
                return "n/a"
            return f"{100 * a['mean']:.2f} +- {100 * a['std']:.2f}"

        alphas = ", ".join(f"{e['selected_alpha']:g}" for e in entries if "selected_alpha" in e)
        lines.append(f"{m:<16}{cell('test_accuracy'):>20}{cell('test_auc'):>20}"
                     f"{len(entries):>9}  {alphas}".rstrip())
    if doc.get("errors"):
        lines.append(f"failed repeats: {', '.join(sorted(doc['errors']))}")
    return "\n".join(lines) + "\n"
