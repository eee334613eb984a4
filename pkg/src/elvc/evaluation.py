"""Utterance- and corpus-level mel-cepstral distortion."""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from elvc.align import cost_matrix_mcc, dtw
from elvc.errors import ShapeError
from elvc.features import MccConfig, mcc_from_logmel
from elvc.io import FeatureMatrix


def _to_mcc(fm, cfg):
    return mcc_from_logmel(fm, cfg) if fm.kind == "LMS" else fm


def utterance_mcd(converted, target, cfg=MccConfig()):
    """Mean frame MCD (dB) along the DTW path between converted and target features."""
    if converted.kind != target.kind:
        raise ShapeError(f"feature kinds differ: {converted.kind} vs {target.kind}")
    a = _to_mcc(converted, cfg)
    b = _to_mcc(target, cfg)
    return dtw(cost_matrix_mcc(a, b)).mean_cost


@dataclass
class EvalReport:
    label: str
    utt_ids: list
    mcd: list
    extra: dict = field(default_factory=dict)

    @property
    def count(self):
        return len(self.mcd)

    @property
    def mean(self):
        return math.fsum(self.mcd) / len(self.mcd) if self.mcd else float("nan")

    @property
    def stdev(self):
        if not self.mcd:
            return float("nan")
        mu = self.mean
        return math.sqrt(math.fsum((v - mu) ** 2 for v in self.mcd) / len(self.mcd))

    def summary(self):
        return (
            f"method: {self.label}\n"
            f"utterances: {self.count}\n"
            f"MCD (dB): {self.mean:.4f} +/- {self.stdev:.4f}\n"
        )

    def write_csv(self, path):
        extra_cols = sorted({c for row in self.extra.values() for c in row})
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["utt_id", "mcd_db"] + extra_cols)
            for utt, value in zip(self.utt_ids, self.mcd):
                row = self.extra.get(utt, {})
                writer.writerow([utt, repr(float(value))] + [row.get(c, "") for c in extra_cols])

    def merge_external(self, path):
        """Join externally computed per-utterance columns (e.g. SER, MOS) by ``utt_id``."""
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "utt_id" not in reader.fieldnames:
                raise ShapeError(f"{path}: external metrics need a utt_id column")
            for row in reader:
                utt = row.pop("utt_id")
                if utt in self.utt_ids:
                    self.extra.setdefault(utt, {}).update({k: v for k, v in row.items() if k != "mcd_db"})


def evaluate_corpus(pairs, label="system", utt_ids=None, cfg=MccConfig()):
    pairs = list(pairs)
    if utt_ids is None:
        utt_ids = [f"utt{i:04d}" for i in range(len(pairs))]
    values = [utterance_mcd(conv, tgt, cfg) for conv, tgt in pairs]
    return EvalReport(label, list(utt_ids), values)


def read_report_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [r["utt_id"] for r in rows], np.array([float(r["mcd_db"]) for r in rows])


def as_lms(data):
    return FeatureMatrix(data, kind="LMS") if data.shape[1] == 80 else FeatureMatrix(data, kind="MCC")
