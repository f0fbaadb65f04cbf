"""Exact AUC and partial AUC, plus per-machine report assembly.

AUC is the exact Mann-Whitney statistic: the fraction of (normal, anomaly)
score pairs where the anomaly scores higher, counting ties as half. The
partial AUC integrates the empirical ROC curve over the false-positive-rate
interval [0, p] and divides by p, so a perfect detector scores 1.0 regardless
of p and ``pauc(..., p=1) == auc(...)`` holds exactly. Ties produce diagonal
ROC segments, matching the pairwise tie convention. Segment clipping at
FPR = p uses exact rational arithmetic.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import InvalidInputError


def _check_classes(scores_normal, scores_anomaly) -> tuple[np.ndarray, np.ndarray]:
    norm = np.asarray(scores_normal, dtype=np.float64).ravel()
    anom = np.asarray(scores_anomaly, dtype=np.float64).ravel()
    if norm.size == 0 or anom.size == 0:
        raise InvalidInputError("both classes need at least one score")
    if not (np.all(np.isfinite(norm)) and np.all(np.isfinite(anom))):
        raise InvalidInputError("scores must be finite")
    return norm, anom


def auc(scores_normal, scores_anomaly) -> float:
    """P(anomaly score > normal score) + 0.5 P(tie), computed exactly."""
    norm, anom = _check_classes(scores_normal, scores_anomaly)
    norm_sorted = np.sort(norm)
    below = np.searchsorted(norm_sorted, anom, side="left")
    below_or_equal = np.searchsorted(norm_sorted, anom, side="right")
    wins = below.sum(dtype=np.float64)
    ties = (below_or_equal - below).sum(dtype=np.float64)
    return float((wins + 0.5 * ties) / (norm.size * anom.size))


def _roc_vertices(norm: np.ndarray, anom: np.ndarray) -> list[tuple[Fraction, Fraction]]:
    """Empirical ROC vertices (FPR, TPR) from (0,0) to (1,1), thresholds
    descending; a tied block moves diagonally in a single segment."""
    n_count = norm.size
    p_count = anom.size
    scores = np.concatenate([norm, anom])
    is_anom = np.concatenate([np.zeros(n_count, bool), np.ones(p_count, bool)])
    order = np.argsort(-scores, kind="stable")
    scores = scores[order]
    is_anom = is_anom[order]
    vertices = [(Fraction(0), Fraction(0))]
    fp = tp = 0
    i = 0
    while i < len(scores):
        j = i
        while j < len(scores) and scores[j] == scores[i]:
            j += 1
        block = is_anom[i:j]
        tp += int(block.sum())
        fp += int((~block).sum())
        vertices.append((Fraction(fp, n_count), Fraction(tp, p_count)))
        i = j
    return vertices


def pauc(scores_normal, scores_anomaly, p: float) -> float:
    """Area under the ROC curve over FPR in [0, p], normalized by p."""
    norm, anom = _check_classes(scores_normal, scores_anomaly)
    if not (0.0 < p <= 1.0):
        raise InvalidInputError(f"p must lie in (0, 1], got {p}")
    # shortest round-trip decimal, so p=0.1 means exactly 1/10 at segment cuts
    p_frac = Fraction(str(float(p)))
    vertices = _roc_vertices(norm, anom)
    area = Fraction(0)
    for (x0, y0), (x1, y1) in zip(vertices, vertices[1:]):
        if x1 == x0 or x0 >= p_frac:
            continue
        if x1 <= p_frac:
            area += (x1 - x0) * (y0 + y1) / 2
        else:
            ym = y0 + (y1 - y0) * (p_frac - x0) / (x1 - x0)
            area += (p_frac - x0) * (y0 + ym) / 2
    return float(area / p_frac)


@dataclass
class MachineMetrics:
    auc: float | None
    pauc: float | None
    n_normal: int
    n_anomaly: int
    scorer_kind: str = ""


@dataclass
class EvalReport:
    per_machine: dict[str, MachineMetrics]
    overall_auc: float | None
    overall_pauc: float | None
    p: float
    config_echo: dict = field(default_factory=dict)

    def to_tsv(self) -> str:
        lines = ["machine_type\tscorer\tAUC\tpAUC\tn_normal\tn_anomaly"]
        for machine in sorted(self.per_machine):
            m = self.per_machine[machine]
            a = "n/a" if m.auc is None else f"{m.auc:.6f}"
            pa = "n/a" if m.pauc is None else f"{m.pauc:.6f}"
            lines.append(f"{machine}\t{m.scorer_kind}\t{a}\t{pa}\t{m.n_normal}\t{m.n_anomaly}")
        oa = "n/a" if self.overall_auc is None else f"{self.overall_auc:.6f}"
        op = "n/a" if self.overall_pauc is None else f"{self.overall_pauc:.6f}"
        lines.append(f"Average\t\t{oa}\t{op}\t\t")
        lines.append(f"# pAUC false-positive-rate bound p = {self.p}")
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "p": self.p,
            "overall": {"auc": self.overall_auc, "pauc": self.overall_pauc},
            "per_machine": {
                k: {"auc": m.auc, "pauc": m.pauc, "n_normal": m.n_normal,
                    "n_anomaly": m.n_anomaly, "scorer": m.scorer_kind}
                for k, m in sorted(self.per_machine.items())
            },
            "config": self.config_echo,
        }


@dataclass
class ScoreRow:
    clip_path: str
    machine_type: str
    label: str
    scorer_kind: str
    score: float


def build_report(score_rows: list[ScoreRow], p: float,
                 config_echo: dict | None = None) -> EvalReport:
    """Per-machine AUC/pAUC plus macro averages over machine types.

    Machine types whose test scores contain a single class are reported with
    null metrics and excluded from the averages.
    """
    by_machine: dict[str, list[ScoreRow]] = {}
    for row in score_rows:
        by_machine.setdefault(row.machine_type, []).append(row)
    per_machine: dict[str, MachineMetrics] = {}
    aucs, paucs = [], []
    for machine, rows in sorted(by_machine.items()):
        normals = [r.score for r in rows if r.label == "normal"]
        anomalies = [r.score for r in rows if r.label == "anomaly"]
        kind = rows[0].scorer_kind
        if not normals or not anomalies:
            warnings.warn(f"{machine}: single-class test scores, metrics undefined")
            per_machine[machine] = MachineMetrics(None, None, len(normals),
                                                  len(anomalies), kind)
            continue
        a = auc(normals, anomalies)
        pa = pauc(normals, anomalies, p)
        per_machine[machine] = MachineMetrics(a, pa, len(normals), len(anomalies), kind)
        aucs.append(a)
        paucs.append(pa)
    overall_auc = float(np.mean(aucs)) if aucs else None
    overall_pauc = float(np.mean(paucs)) if paucs else None
    return EvalReport(per_machine=per_machine, overall_auc=overall_auc,
                      overall_pauc=overall_pauc, p=p, config_echo=config_echo or {})


def write_score_table(rows: list[ScoreRow], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("clip_path\tmachine_type\tlabel\tscorer_kind\tscore\n")
        for r in rows:
            fh.write(f"{r.clip_path}\t{r.machine_type}\t{r.label}\t{r.scorer_kind}\t{r.score!r}\n")


def read_score_table(path: str | Path) -> list[ScoreRow]:
    rows = []
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("clip_path"):
            raise InvalidInputError(f"{path} is not a score table")
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 5:
                raise InvalidInputError(f"malformed score row: {line!r}")
            rows.append(ScoreRow(parts[0], parts[1], parts[2], parts[3], float(parts[4])))
    return rows


def write_report(report: EvalReport, out_dir: str | Path) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tsv = out_dir / "report.tsv"
    js = out_dir / "report.json"
    tsv.write_text(report.to_tsv())
    with open(js, "w") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return tsv, js
