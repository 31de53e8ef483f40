"""Reading crowdsourced label files into dense answer matrices.

Canonical formats (UTF-8, header row required, quoting allowed):

    labels:  task,worker,label
    gold:    task,label

Tab-separated variants are accepted with ``format="tsv"`` or a ``.tsv`` suffix.
"""

from __future__ import annotations

import csv
import json
import os
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

LABEL_HEADER = ("task", "worker", "label")
GOLD_HEADER = ("task", "label")


class LabelFileError(ValueError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class UnmappedLabelError(ValueError):
    def __init__(self, labels):
        self.labels = sorted(labels)
        super().__init__(f"labels not covered by the binarization config: {self.labels}")


class GoldMismatchError(ValueError):
    def __init__(self, task_ids):
        self.task_ids = sorted(task_ids, key=id_sort_key)
        super().__init__(f"gold labels for tasks absent from the label file: {self.task_ids}")


class DuplicateLabelWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RawLabelRecord:
    task_id: str
    worker_id: str
    label: str


@dataclass(frozen=True)
class BinaryLabel:
    task_id: str
    worker_id: str
    value: int


def id_sort_key(value: str):
    """Numeric ids sort numerically, everything else lexicographically after them."""
    return (0, int(value), "") if value.lstrip("-").isdigit() else (1, 0, value)


def _delimiter(path, format):
    fmt = format or ("tsv" if str(path).lower().endswith(".tsv") else "csv")
    if fmt not in ("csv", "tsv"):
        raise ValueError(f"unsupported format {fmt!r}; use csv or tsv")
    return "\t" if fmt == "tsv" else ","


def _read_rows(path, format, header):
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such label file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=_delimiter(path, format))
        first = next(reader, None)
        if first is None:
            raise LabelFileError(path, 1, f"missing header row {','.join(header)}")
        if tuple(h.strip().lower() for h in first) != header:
            raise LabelFileError(path, 1, f"expected header {','.join(header)}, got {','.join(first)}")
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise LabelFileError(path, reader.line_num,
                                     f"expected {len(header)} fields, got {len(row)}")
            cells = [cell.strip() for cell in row]
            for name, cell in zip(header, cells):
                if not cell:
                    raise LabelFileError(path, reader.line_num, f"empty {name} field")
            yield reader.line_num, cells


def parse_labels(path, format: Optional[str] = None) -> list[RawLabelRecord]:
    """One record per (task, worker); a repeated pair keeps its last label."""
    records: dict[tuple[str, str], RawLabelRecord] = {}
    duplicates = 0
    for _, (task, worker, label) in _read_rows(path, format, LABEL_HEADER):
        key = (task, worker)
        if key in records:
            duplicates += 1
        records[key] = RawLabelRecord(task, worker, label)
    if duplicates:
        warnings.warn(f"{path}: {duplicates} duplicate (task, worker) labels, kept the last",
                      DuplicateLabelWarning, stacklevel=2)
    return list(records.values())


def parse_gold(path, format: Optional[str] = None) -> dict[str, str]:
    gold = {}
    for line, (task, label) in _read_rows(path, format, GOLD_HEADER):
        if task in gold and gold[task] != label:
            raise LabelFileError(path, line, f"conflicting gold labels for task {task}")
        gold[task] = label
    return gold


@dataclass(frozen=True)
class BinarizationConfig:
    positive: frozenset
    negative: frozenset

    def __post_init__(self):
        object.__setattr__(self, "positive", frozenset(str(v) for v in self.positive))
        object.__setattr__(self, "negative", frozenset(str(v) for v in self.negative))
        overlap = self.positive & self.negative
        if overlap:
            raise ValueError(f"labels mapped to both classes: {sorted(overlap)}")

    @classmethod
    def default(cls) -> "BinarizationConfig":
        """{-1, 0} vs {1, +1}: covers both 0/1 and -1/+1 encoded files."""
        return cls(frozenset({"1", "+1"}), frozenset({"0", "-1"}))

    @classmethod
    def from_mapping(cls, mapping: dict) -> "BinarizationConfig":
        return cls(frozenset(mapping["positive"]), frozenset(mapping["negative"]))

    @classmethod
    def from_file(cls, path) -> "BinarizationConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_mapping(json.load(fh))

    def value(self, label: str) -> int:
        if label in self.positive:
            return 1
        if label in self.negative:
            return -1
        raise UnmappedLabelError([label])


def binarize(records: Iterable[RawLabelRecord], config: BinarizationConfig) -> list[BinaryLabel]:
    records = list(records)
    unmapped = {r.label for r in records} - config.positive - config.negative
    if unmapped:
        raise UnmappedLabelError(unmapped)
    return [BinaryLabel(r.task_id, r.worker_id, config.value(r.label)) for r in records]


def binarize_gold(gold: dict[str, str], config: BinarizationConfig) -> dict[str, int]:
    unmapped = set(gold.values()) - config.positive - config.negative
    if unmapped:
        raise UnmappedLabelError(unmapped)
    return {task: config.value(label) for task, label in gold.items()}


@dataclass(frozen=True)
class DatasetStats:
    num_tasks: int
    num_workers: int
    num_labels: int
    density: float
    worker_degree: float


@dataclass(frozen=True)
class Dataset:
    """Sparse task x worker label matrix with entries in {-1, +1}.

    ``gold`` holds one entry per task: +/-1, or 0 when no gold label is known.
    """

    task_ids: tuple
    worker_ids: tuple
    task_index: np.ndarray
    worker_index: np.ndarray
    values: np.ndarray
    gold: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return len(self.worker_ids)

    @property
    def num_tasks(self) -> int:
        return len(self.task_ids)

    @property
    def stats(self) -> DatasetStats:
        return summarize(self)


def build_dataset(labels: Iterable[BinaryLabel], gold: Optional[dict[str, int]] = None) -> Dataset:
    labels = list(labels)
    task_ids = tuple(sorted({lab.task_id for lab in labels}, key=id_sort_key))
    worker_ids = tuple(sorted({lab.worker_id for lab in labels}, key=id_sort_key))
    if gold is not None:
        missing = set(gold) - set(task_ids)
        if missing:
            raise GoldMismatchError(missing)
    tpos = {tid: k for k, tid in enumerate(task_ids)}
    wpos = {wid: k for k, wid in enumerate(worker_ids)}
    gold_arr = None
    if gold is not None:
        gold_arr = np.array([gold.get(tid, 0) for tid in task_ids], dtype=np.int8)
    return Dataset(
        task_ids,
        worker_ids,
        np.array([tpos[lab.task_id] for lab in labels], dtype=np.int64),
        np.array([wpos[lab.worker_id] for lab in labels], dtype=np.int64),
        np.array([lab.value for lab in labels], dtype=np.int8),
        gold_arr,
    )


def load_dataset(labels_path, gold_path=None, config: Optional[BinarizationConfig] = None,
                 format: Optional[str] = None) -> Dataset:
    config = config or BinarizationConfig.default()
    labels = binarize(parse_labels(labels_path, format), config)
    gold = None
    if gold_path is not None:
        gold = binarize_gold(parse_gold(gold_path, format), config)
    return build_dataset(labels, gold)


def filter_workers(dataset: Dataset, min_labels: int = 10) -> Dataset:
    """Drop workers with fewer than ``min_labels`` labels; tasks are all kept."""
    counts = np.bincount(dataset.worker_index, minlength=dataset.n)
    keep = counts >= min_labels
    remap = np.cumsum(keep) - 1
    entry_keep = keep[dataset.worker_index]
    return Dataset(
        dataset.task_ids,
        tuple(w for w, k in zip(dataset.worker_ids, keep) if k),
        dataset.task_index[entry_keep],
        remap[dataset.worker_index[entry_keep]],
        dataset.values[entry_keep],
        dataset.gold,
    )


def to_task_samples(dataset: Dataset):
    """Dense (num_tasks, n) int8 answer matrix with 0 for missing labels, plus gold."""
    answers = np.zeros((dataset.num_tasks, dataset.n), dtype=np.int8)
    answers[dataset.task_index, dataset.worker_index] = dataset.values
    return answers, dataset.gold


def stats_from_answers(answers) -> DatasetStats:
    answers = np.asarray(answers)
    tasks, workers = answers.shape
    labels = int(np.count_nonzero(answers))
    return stats_from_counts(tasks, workers, labels)


def summarize(dataset: Dataset) -> DatasetStats:
    return stats_from_counts(dataset.num_tasks, dataset.n, int(dataset.values.shape[0]))


def stats_from_counts(tasks, workers, labels) -> DatasetStats:
    density = labels / (tasks * workers) if tasks and workers else 0.0
    degree = labels / workers if workers else 0.0
    return DatasetStats(tasks, workers, labels, density, degree)


def write_labels(path, answers, worker_ids=None, task_ids=None) -> None:
    """Serialize a dense answer matrix in the canonical label format (zeros skipped)."""
    answers = np.asarray(answers)
    tasks, workers = answers.shape
    task_ids = task_ids or padded_ids("t", tasks)
    worker_ids = worker_ids or padded_ids("w", workers)
    rows, cols = np.nonzero(answers)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(LABEL_HEADER)
        for r, c in zip(rows.tolist(), cols.tolist()):
            w.writerow([task_ids[r], worker_ids[c], int(answers[r, c])])


def write_gold(path, truth, task_ids=None, answers=None) -> None:
    """Serialize gold labels. With ``answers``, tasks nobody labeled are skipped,
    matching what write_labels puts in the label file."""
    truth = np.asarray(truth)
    task_ids = task_ids or padded_ids("t", truth.shape[0])
    if answers is not None:
        labeled = np.asarray(answers).any(axis=1)
        task_ids = [tid for tid, keep in zip(task_ids, labeled) if keep]
        truth = truth[labeled]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(GOLD_HEADER)
        w.writerows([tid, int(g)] for tid, g in zip(task_ids, truth.tolist()))


def padded_ids(prefix, count):
    """Zero-padded ids ``prefix0 .. prefix{count-1}`` that sort lexicographically."""
    width = len(str(max(count - 1, 0)))
    return [f"{prefix}{k:0{width}d}" for k in range(count)]
