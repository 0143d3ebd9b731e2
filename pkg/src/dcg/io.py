"""Serialization: model JSON documents and CSV datasets/reports.

Model JSON schema (format_version 1): ``n``, ``card``, ``edges`` (array of
[parent, child] pairs; unordered pairs [i, j] for undirected models),
``biases``, ``weights`` (child-major 2-D arrays in edge order), and
``model_kind`` in {"dcg", "dag", "ug"}. Numbers round-trip losslessly
(shortest repr). Dataset CSVs carry a header row of variable names and
integer state indices; the mask CSV has the same shape with 0/1 entries.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .baselines import DagModel, UgModel
from .errors import ValidationError
from .estimation import Dataset
from .inference import DistributionTable
from .model import DirectedGraph, Model, Parameters, StateSpace

FORMAT_VERSION = 1


def model_to_dict(model) -> dict:
    if isinstance(model, Model):
        kind, edges = "dcg", model.graph.edges
    elif isinstance(model, DagModel):
        kind, edges = "dag", model.graph.edges
    elif isinstance(model, UgModel):
        kind, edges = "ug", model.pairs
    else:
        raise ValidationError(f"unsupported model type {type(model).__name__}")
    return {
        "format_version": FORMAT_VERSION,
        "model_kind": kind,
        "n": model.space.n,
        "card": list(model.space.card),
        "edges": [list(e) for e in edges],
        "biases": [b.tolist() for b in model.params.biases],
        "weights": [w.tolist() for w in model.params.weights],
    }


def model_from_dict(doc: dict):
    version = doc.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ValidationError(f"unsupported model format_version {version}")
    kind = doc.get("model_kind", "dcg")
    space = StateSpace(tuple(doc["card"]))
    if int(doc["n"]) != space.n:
        raise ValidationError("field n disagrees with the card array length")
    params = Parameters([np.asarray(b, float) for b in doc["biases"]],
                        [np.asarray(w, float) for w in doc["weights"]])
    edges = tuple((int(a), int(b)) for a, b in doc["edges"])
    if kind == "dcg":
        return Model(space, DirectedGraph(space.n, edges), params)
    if kind == "dag":
        return DagModel(space, DirectedGraph(space.n, edges), params)
    if kind == "ug":
        return UgModel(space, edges, params)
    raise ValidationError(f"unknown model_kind {kind!r}")


def save_model(path, model) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ValidationError(f"{path}: not valid JSON: {err}") from err
    return model_from_dict(doc)


# ---------------------------------------------------------------------------
# Dataset CSV
# ---------------------------------------------------------------------------


def default_names(n: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(n))


def write_dataset(data_path, mask_path, data: Dataset) -> None:
    names = data.names or default_names(data.n)
    for path, matrix in ((data_path, data.X), (mask_path, data.mask.astype(int))):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(names)
            writer.writerows(matrix.tolist())


def _read_int_csv(path) -> tuple[tuple[str, ...], np.ndarray]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        width = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ValidationError(
                    f"{path}: line {lineno}: expected {width} fields, got {len(row)}")
            try:
                rows.append([int(cell) for cell in row])
            except ValueError:
                raise ValidationError(
                    f"{path}: line {lineno}: non-integer cell in {row!r}") from None
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return tuple(h.strip() for h in header), np.asarray(rows, np.int64)


def inferred_space(data: Dataset, card=None) -> StateSpace:
    """State space from observed maxima, optionally overridden per column."""
    observed = data.X.max(axis=0) + 1
    if card is None:
        if np.any(observed < 2):
            cols = np.nonzero(observed < 2)[0].tolist()
            raise ValidationError(
                f"columns {cols} show a single state; supply explicit cardinalities")
        return StateSpace(tuple(int(k) for k in observed))
    if np.isscalar(card):
        card = [int(card)] * data.n
    card = [int(k) for k in card]
    if len(card) != data.n:
        raise ValidationError(f"need {data.n} cardinalities, got {len(card)}")
    for i, (k, seen) in enumerate(zip(card, observed)):
        if seen > k:
            raise ValidationError(
                f"column {i} contains state {int(seen) - 1}, outside cardinality {k}")
    return StateSpace(tuple(card))


def ingest_dataset(data_path, mask_path, card=None) -> Dataset:
    """Load and validate a discretized interventional dataset."""
    names, X = _read_int_csv(data_path)
    mask_names, mask_int = _read_int_csv(mask_path)
    if mask_int.shape != X.shape:
        raise ValidationError(
            f"mask shape {mask_int.shape} does not match data shape {X.shape}")
    bad = (mask_int != 0) & (mask_int != 1)
    if np.any(bad):
        d, i = np.argwhere(bad)[0]
        raise ValidationError(
            f"{mask_path}: line {int(d) + 2}: mask entries must be 0 or 1")
    data = Dataset(X, mask_int.astype(bool), names=names)
    inferred_space(data, card)  # raises on impossible cardinalities
    return data


# ---------------------------------------------------------------------------
# Result CSVs
# ---------------------------------------------------------------------------


def write_samples(path, samples: np.ndarray, names=None) -> None:
    names = names or default_names(samples.shape[1])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        writer.writerows(samples.tolist())


def write_table(path_or_handle, table: DistributionTable, names=None) -> None:
    names = names or default_names(max(table.nodes) + 1)
    close = False
    if isinstance(path_or_handle, (str, Path)):
        fh = open(path_or_handle, "w", newline="")
        close = True
    else:
        fh = path_or_handle
    try:
        writer = csv.writer(fh)
        writer.writerow([names[i] for i in table.nodes] + ["p"])
        for states, p in table.iter_rows():
            writer.writerow([*states, repr(p)])
    finally:
        if close:
            fh.close()


def write_path_csv(path, points) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "n_active_edges", "train_nll", "test_nll"])
        for pt in points:
            writer.writerow([repr(pt.lam), len(pt.active_edges), repr(pt.train_nll),
                             "" if pt.test_nll is None else repr(pt.test_nll)])


def write_report_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "seed", "lambda", "n_edges", "test_nll"])
        rows = []
        for report in reports:
            rows.extend(report.rows)
        rows.sort(key=lambda r: (r.method, r.seed, r.lam))
        for r in rows:
            writer.writerow([r.method, r.seed, repr(r.lam), r.n_edges, repr(r.test_nll)])
