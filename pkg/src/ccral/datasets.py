"""Converters from the public raw files into CSVs matching the shipped schemas.

Only the conversion lives here; the raw files have to be obtained separately.

* german: UCI Statlog ``german.data`` (space separated, coded attributes)
* adult: UCI ``adult.data`` (comma separated, no header)
* compas: ProPublica ``compas-scores-two-years.csv``
"""

from __future__ import annotations

import csv

from .data import RawTable, builtin_schema
from .exceptions import FileUnreadable

GERMAN_FIELDS = [
    "checking_status", "duration", "credit_history", "purpose", "credit_amount",
    "savings_status", "employment", "installment_commitment", "personal_status",
    "other_parties", "residence_since", "property_magnitude", "age",
    "other_payment_plans", "housing", "existing_credits", "job", "num_dependents",
    "own_telephone", "foreign_worker", "class",
]
GERMAN_FEMALE = {"A92", "A95"}

ADULT_FIELDS = [
    "age", "workclass", "fnlwgt", "education", "education_num", "marital_status",
    "occupation", "relationship", "race", "sex", "capital_gain", "capital_loss",
    "hours_per_week", "native_country", "income",
]


def _read_lines(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return [line.rstrip("\n") for line in fh if line.strip()]
    except (OSError, UnicodeDecodeError) as exc:
        raise FileUnreadable(f"cannot read {path}: {exc}") from exc


def _project(records, schema):
    return RawTable(tuple(schema.names), tuple(tuple(r[n] for n in schema.names) for r in records))


def prepare_german(raw_path) -> RawTable:
    """Sex is derived from the personal-status code; class 1 is good credit."""
    records = []
    for line in _read_lines(raw_path):
        rec = dict(zip(GERMAN_FIELDS, line.split()))
        rec["sex"] = "female" if rec["personal_status"] in GERMAN_FEMALE else "male"
        rec["credit"] = "good" if rec["class"] == "1" else "bad"
        records.append(rec)
    return _project(records, builtin_schema("german"))


def prepare_adult(raw_path) -> RawTable:
    """Rows are passed through unchanged; '?' cells are dropped later by load_csv."""
    records = []
    for line in _read_lines(raw_path):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(ADULT_FIELDS):
            continue
        rec = dict(zip(ADULT_FIELDS, cells))
        rec["income"] = rec["income"].rstrip(".")
        records.append(rec)
    return _project(records, builtin_schema("adult"))


def prepare_compas(raw_path) -> RawTable:
    """Applies the usual ProPublica row filter (6,172 rows on the public file)."""
    try:
        with open(raw_path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise FileUnreadable(f"cannot read {raw_path}: {exc}") from exc
    kept = []
    for r in rows:
        try:
            days = int(r["days_b_screening_arrest"])
        except ValueError:
            continue
        if -30 <= days <= 30 and r["is_recid"] != "-1" and r["c_charge_degree"] != "O" \
                and r["score_text"] != "N/A":
            kept.append(r)
    return _project(kept, builtin_schema("compas"))


PREPARERS = {"german": prepare_german, "adult": prepare_adult, "compas": prepare_compas}
