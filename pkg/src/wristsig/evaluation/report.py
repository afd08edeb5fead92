"""Per-cell aggregation of execution results."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..corpus import SignatureCorpus
from .metrics import auc_from_arrays, eer_from_arrays
from .protocol import Aggregation, ExperimentConfig, ExecutionResult, run_executions

REPORT_FORMAT = "wristsig-report"
REPORT_VERSION = 1


@dataclass(frozen=True)
class CellResult:
    classifier: str
    task: str
    subset: str
    n_refs: int
    auc_mean: Optional[float]
    auc_std: Optional[float]
    eer_mean: Optional[float]
    eer_std: Optional[float]
    n_executions: int
    n_failed: int = 0
    errors: tuple = ()

    @property
    def key(self) -> tuple:
        return (self.classifier, self.task, self.subset, self.n_refs)


def _metrics(results: list[ExecutionResult]) -> tuple[float, float]:
    g = np.array([s.score for r in results for s in r.scores if s.role == "genuine"])
    f = np.array([s.score for r in results for s in r.scores if s.role != "genuine"])
    return auc_from_arrays(g, f), eer_from_arrays(g, f)


def summarize_cell(results: list[ExecutionResult], aggregation=Aggregation.PER_EXECUTION) -> CellResult:
    head = results[0]
    ok = [r for r in results if r.error is None]
    failed = [r for r in results if r.error is not None]
    errors = tuple(sorted({r.error for r in failed}))
    stats = [None] * 4
    if ok:
        if Aggregation(aggregation) is Aggregation.POOLED:
            groups: dict[int, list] = {}
            for r in ok:
                groups.setdefault(r.repetition, []).append(r)
            pairs = [_metrics(groups[k]) for k in sorted(groups)]
        else:
            pairs = [_metrics([r]) for r in ok]
        auc = np.array([p[0] for p in pairs])
        eer = np.array([p[1] for p in pairs])
        stats = [float(auc.mean()), float(auc.std()), float(eer.mean()), float(eer.std())]
    return CellResult(
        head.classifier.value, head.task.value, head.subset.value, head.n_refs,
        *stats, n_executions=len(ok), n_failed=len(failed), errors=errors,
    )


@dataclass(frozen=True)
class EvaluationReport:
    config: dict
    n_users: int
    cells: tuple[CellResult, ...]

    def cell(self, classifier, task, subset, n_refs) -> CellResult:
        key = tuple(getattr(v, "value", v) for v in (classifier, task, subset)) + (int(n_refs),)
        for c in self.cells:
            if c.key == key:
                return c
        raise KeyError(key)

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "n_users": self.n_users,
            "config": self.config,
            "cells": [{**asdict(c), "errors": list(c.errors)} for c in self.cells],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    def to_table(self) -> str:
        def fmt(v):
            return "   -  " if v is None else f"{v:.4f}"

        header = f"{'classifier':<14} {'task':<8} {'subset':<11} {'refs':>4} {'AUC':>7} {'±':>7} {'EER':>7} {'±':>7} {'execs':>6}"
        lines = [header, "-" * len(header)]
        for c in self.cells:
            lines.append(
                f"{c.classifier:<14} {c.task:<8} {c.subset:<11} {c.n_refs:>4} "
                f"{fmt(c.auc_mean):>7} {fmt(c.auc_std):>7} {fmt(c.eer_mean):>7} {fmt(c.eer_std):>7} {c.n_executions:>6}"
                + (f"  ({c.n_failed} failed)" if c.n_failed else "")
            )
        return "\n".join(lines)


def build_report(results: list[ExecutionResult], config: ExperimentConfig, n_users: int) -> EvaluationReport:
    cells: dict[tuple, list[ExecutionResult]] = {}
    for r in results:
        cells.setdefault((r.classifier.value, r.task.value, r.subset.value, r.n_refs), []).append(r)
    summary = tuple(summarize_cell(cells[k], config.aggregation) for k in sorted(cells))
    return EvaluationReport(config.to_dict(), n_users, summary)


def run_experiment(corpus: SignatureCorpus, config: ExperimentConfig, jobs: int = 1) -> EvaluationReport:
    """Full cross-product of classifiers x tasks x subsets x reference counts."""
    results = run_executions(corpus, config, jobs=jobs)
    return build_report(results, config, len(corpus))
