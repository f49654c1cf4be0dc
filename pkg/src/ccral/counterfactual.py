"""Counterfactual generation by treatment flipping and nearest-neighbour labels.

A counterfactual copies a real training row and flips its treatment. Its
label is the label of the nearest real training row (Euclidean, treatment
coordinate excluded) among rows that actually carry the flipped treatment.
Restricting the candidates that way keeps a row from matching itself.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import COUNTERFACTUAL, REAL, Dataset
from .exceptions import DimensionMismatch, MatchingInfeasible, NonBinaryTreatmentValue

# query rows x candidate rows per block in the Gram-matrix prefilter
BLOCK_ELEMENTS = 1 << 22


def flip_treatment(x, treatment_coord):
    x = np.array(x, dtype=float)
    v = x[treatment_coord]
    if v != 0.0 and v != 1.0:
        raise NonBinaryTreatmentValue(f"treatment value {v!r} is not 0 or 1")
    x[treatment_coord] = 1.0 - v
    return x


def _sq_distances(rows, query, treatment_coord):
    """Squared distances from ``query`` to each row, treatment coordinate masked.

    Every exact distance in this module goes through here so that the
    single-pair and blocked paths round identically.
    """
    diff = np.atleast_2d(rows) - query
    diff[:, treatment_coord] = 0.0
    return np.sum(diff * diff, axis=1)


def matching_distance(a, b, treatment_coord):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatch(f"vectors of shapes {a.shape} and {b.shape}")
    return float(np.sqrt(_sq_distances(b, a, treatment_coord)[0]))


def _candidates(train: Dataset, treatment_value):
    return np.flatnonzero((train.t == treatment_value) & (train.origin == REAL))


def match_label(cf, train: Dataset):
    """``(label, matched_index, distance)`` of the nearest eligible real row.

    Eligible rows are real rows whose treatment equals the treatment of
    ``cf``; ties go to the smallest row index.
    """
    cf = np.asarray(cf, dtype=float)
    if cf.shape != (train.d,):
        raise DimensionMismatch(f"expected a vector of length {train.d}, got {cf.shape}")
    cand = _candidates(train, cf[train.treatment_coord])
    if len(cand) == 0:
        raise MatchingInfeasible("no real training row carries the flipped treatment")
    sq = _sq_distances(train.X[cand], cf, train.treatment_coord)
    k = int(np.argmin(sq))
    j = int(cand[k])
    return int(train.y[j]), j, float(np.sqrt(sq[k]))


@dataclass(frozen=True, eq=False)
class CounterfactualSet:
    """One counterfactual per real training row, aligned with ``source_index``."""

    source_index: np.ndarray
    cf_X: np.ndarray
    cf_label: np.ndarray
    matched_index: np.ndarray
    match_distance: np.ndarray
    treatment_coord: int

    def __len__(self):
        return len(self.source_index)

    def as_dataset(self, positions=None, feature_names=None) -> Dataset:
        """Selected entries (all by default) as a Dataset of counterfactual rows."""
        pos = np.arange(len(self)) if positions is None else np.asarray(positions, dtype=np.intp)
        X = self.cf_X[pos]
        return Dataset(X, self.cf_label[pos], X[:, self.treatment_coord],
                       np.full(len(pos), COUNTERFACTUAL, dtype=np.int8),
                       self.treatment_coord, feature_names)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["source_index", "matched_index", "distance", "cf_label"])
            for s, m, dist, lab in zip(self.source_index, self.matched_index,
                                       self.match_distance, self.cf_label):
                writer.writerow([int(s), int(m), repr(float(dist)), int(lab)])


def _nearest_blocked(queries, cand_X, coord):
    """Exact masked nearest neighbour (first index on ties) for each query row.

    A Gram-matrix pass bounds the search; every candidate whose approximate
    squared distance lies within the rounding bound of the approximate minimum
    is then rescored exactly with :func:`_sq_distances`.
    """
    n_q, d = queries.shape
    Qm = queries.copy()
    Qm[:, coord] = 0.0
    Cm = cand_X.copy()
    Cm[:, coord] = 0.0
    q_norm = np.einsum("ij,ij->i", Qm, Qm)
    c_norm = np.einsum("ij,ij->i", Cm, Cm)
    slack_unit = 64.0 * (d + 2) * np.finfo(float).eps
    c_max = float(c_norm.max())

    best = np.empty(n_q, dtype=np.intp)
    best_sq = np.empty(n_q)
    block = max(1, BLOCK_ELEMENTS // max(1, len(cand_X)))
    for start in range(0, n_q, block):
        stop = min(n_q, start + block)
        approx = q_norm[start:stop, None] + c_norm[None, :] - 2.0 * (Qm[start:stop] @ Cm.T)
        floor = approx.min(axis=1)
        slack = slack_unit * (q_norm[start:stop] + c_max) + 1e-300
        for r in range(stop - start):
            near = np.flatnonzero(approx[r] <= floor[r] + 2.0 * slack[r])
            sq = _sq_distances(cand_X[near], queries[start + r], coord)
            k = int(np.argmin(sq))
            best[start + r] = near[k]
            best_sq[start + r] = sq[k]
    return best, best_sq


def build_counterfactual_set(train: Dataset) -> CounterfactualSet:
    """Counterfactual and matched label for every real row of ``train``.

    Counterfactual rows already present in ``train`` are neither sources nor
    candidates. The result does not depend on evaluation order.
    """
    coord = train.treatment_coord
    sources = np.flatnonzero(train.origin == REAL)
    cf_X = np.array(train.X[sources])
    cf_X[:, coord] = 1.0 - cf_X[:, coord]

    n = len(sources)
    matched = np.empty(n, dtype=np.intp)
    dist = np.empty(n)
    for value in (0, 1):
        rows = np.flatnonzero(cf_X[:, coord] == value)
        if len(rows) == 0:
            continue
        cand = _candidates(train, value)
        if len(cand) == 0:
            raise MatchingInfeasible(f"no real training row has treatment {value}")
        idx, sq = _nearest_blocked(cf_X[rows], np.ascontiguousarray(train.X[cand]), coord)
        matched[rows] = cand[idx]
        dist[rows] = np.sqrt(sq)
    labels = train.y[matched].astype(np.int8)
    for arr in (sources, cf_X, labels, matched, dist):
        arr.setflags(write=False)
    return CounterfactualSet(sources, cf_X, labels, matched, dist, coord)
