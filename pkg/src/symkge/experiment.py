"""Multi-run experiments comparing training with and without the alignment term."""

from __future__ import annotations

import json
import multiprocessing
import os
from dataclasses import dataclass, replace

from .config import TrainConfig, config_as_dict
from .errors import DataError, SymkgeError
from .evaluation import evaluate_split, students_t_test
from .graph import Dataset, load_dataset
from .mining import PositiveDict, mine_positive_dict
from .training import train

BASELINE_ARM = "baseline"
CONTRASTIVE_ARM = "contrastive"
ABLATIONS = (BASELINE_ARM, CONTRASTIVE_ARM, "both")


@dataclass(frozen=True)
class ExperimentSpec:
    train_path: str | os.PathLike[str]
    valid_path: str | os.PathLike[str] | None
    test_path: str | os.PathLike[str]
    config: TrainConfig
    ablation: str = "both"
    runs: int = 3
    base_seed: int = 0

    def __post_init__(self):
        if self.ablation not in ABLATIONS:
            raise DataError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        if self.runs < 1:
            raise DataError(f"runs must be >= 1, got {self.runs}")


def _metrics_entry(seed: int, report) -> dict[str, object]:
    return {
        "seed": seed,
        "mrr": report.mrr,
        "hits1": report.hits[1],
        "hits3": report.hits[3],
        "hits10": report.hits[10],
    }


def _mean_metrics(entries: list[dict[str, object]]) -> dict[str, float]:
    keys = ("mrr", "hits1", "hits3", "hits10")
    return {k: sum(float(e[k]) for e in entries) / len(entries) for k in keys}


def _single_run(
    dataset: Dataset,
    spec: ExperimentSpec,
    arm: str,
    run_index: int,
    pos_dict: PositiveDict | None,
) -> dict[str, object]:
    seed = spec.base_seed + run_index
    cfg = replace(spec.config, seed=seed)
    known = set(dataset.train) | set(dataset.valid) | set(dataset.test)
    try:
        result = train(dataset.graph, pos_dict, cfg)
        report = evaluate_split(result.table, cfg.scorer, dataset.test, known)
    except SymkgeError as exc:
        exc.args = (f"{arm} arm, run {run_index + 1}/{spec.runs} (seed {seed}): {exc}",)
        raise
    return _metrics_entry(seed, report)


def _run_arm(
    dataset: Dataset,
    spec: ExperimentSpec,
    with_positives: bool,
    pos_dict,
    progress=None,
    run_pool=None,
) -> dict[str, object]:
    arm = CONTRASTIVE_ARM if with_positives else BASELINE_ARM
    arm_dict = pos_dict if with_positives else None
    args = [(dataset, spec, arm, i, arm_dict) for i in range(spec.runs)]
    if run_pool is not None:
        entries = run_pool.starmap(_single_run, args)
    else:
        entries = [_single_run(*a) for a in args]
    if progress is not None:
        for i, entry in enumerate(entries):
            progress(f"{arm} run {i + 1}/{spec.runs}: mrr={entry['mrr']:.4f}")
    return {"metrics": entries, "mean": _mean_metrics(entries)}


def run_experiment(
    spec: ExperimentSpec,
    workers: int = 1,
    progress=None,
    parallel_runs: bool = False,
) -> dict[str, object]:
    """Train and evaluate every arm of the spec; returns the JSON-able report.

    The report is fully deterministic for a fixed spec: run seeds are
    base_seed + run index, and no timing or host information is included.
    Runs execute sequentially unless parallel_runs is set; each run is fully
    isolated (own seed-derived rng streams), so the report is identical
    either way.
    """
    if not spec.test_path:
        raise DataError("experiment needs a test split for evaluation")
    dataset = load_dataset(spec.train_path, spec.valid_path, spec.test_path)

    arms: dict[str, object] = {}
    pos_dict = None
    if spec.ablation in (CONTRASTIVE_ARM, "both"):
        pos_dict, _ = mine_positive_dict(dataset.graph, spec.config.k, workers=workers)
        if progress is not None:
            mined = sum(len(s) for s in pos_dict.targets)
            progress(f"mined positive dictionary: {mined} directed pairs")

    run_pool = None
    if parallel_runs and spec.runs > 1:
        method = "fork" if "fork" in multiprocessing.get_all_start_methods() else None
        run_pool = multiprocessing.get_context(method).Pool(
            processes=min(spec.runs, max(2, workers))
        )
    try:
        if spec.ablation in (BASELINE_ARM, "both"):
            arms[BASELINE_ARM] = _run_arm(dataset, spec, False, None, progress, run_pool)
        if spec.ablation in (CONTRASTIVE_ARM, "both"):
            arms[CONTRASTIVE_ARM] = _run_arm(dataset, spec, True, pos_dict, progress, run_pool)
    finally:
        if run_pool is not None:
            run_pool.close()
            run_pool.join()

    report: dict[str, object] = {
        "ablation": spec.ablation,
        "runs": spec.runs,
        "base_seed": spec.base_seed,
        "config": config_as_dict(spec.config),
        "arms": arms,
    }
    if spec.ablation == "both" and spec.runs >= 2:
        mrr_a = [float(e["mrr"]) for e in arms[BASELINE_ARM]["metrics"]]
        mrr_b = [float(e["mrr"]) for e in arms[CONTRASTIVE_ARM]["metrics"]]
        ttest = students_t_test(mrr_a, mrr_b)
        report["ttest_mrr"] = {"t": ttest.t_statistic, "p": ttest.p_value}
    else:
        report["ttest_mrr"] = None
    return report


def report_to_json(report: dict[str, object]) -> str:
    """Canonical JSON encoding; byte-identical for identical reports."""
    return json.dumps(report, sort_keys=True, indent=2) + "\n"
