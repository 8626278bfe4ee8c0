"""Risk-utility experiments: repeated private releases of one graph, refits
under competing estimators, and KL-based utility loss, reduced to tidy CSVs.

Determinism contract: every replicate derives its seeds from
(base_seed, purpose, mechanism index, replicate index) before any work is
scheduled, and results are sorted on those keys before aggregation, so the
emitted CSVs are byte-identical for any worker count.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._util import derive_seed
from .inference import (
    FitConfig,
    FitResult,
    InferenceError,
    KLConfig,
    kl_utility,
    mcmle_fit,
    missing_data_fit,
)
from .netgraph import Graph, NodeAttributes
from .privacy import MechanismParams, release
from .terms import ModelSpec

__all__ = [
    "ExperimentPlan",
    "ExperimentReport",
    "FitRecord",
    "HarnessError",
    "uniform_sweep",
    "run_experiment",
    "summary_rows",
    "summarize",
]

METHODS = ("naive", "missing")


class HarnessError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentPlan:
    graph: Graph
    model: ModelSpec
    mechanisms: tuple[tuple[str, MechanismParams], ...]
    attrs: NodeAttributes | None = None
    replicates: int = 20
    methods: tuple[str, ...] = METHODS
    base_seed: int = 0
    fit: FitConfig = FitConfig()
    kl: KLConfig = KLConfig()
    workers: int = 1

    def __post_init__(self):
        if self.replicates < 1:
            raise HarnessError("need at least one replicate")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise HarnessError(f"unknown methods {bad}; known: {METHODS}")
        if not self.mechanisms:
            raise HarnessError("need at least one mechanism")


def uniform_sweep(n: int, flip_probs, directed: bool = False):
    """Named uniform mechanisms at the optimal corner for each flip rate."""
    mechs = []
    for pi in flip_probs:
        if not 0.0 < pi < 0.5:
            raise HarnessError(f"flip probability must lie in (0, 0.5), got {pi}")
        p = 1.0 - pi
        mechs.append(
            (f"pi={pi:g}", MechanismParams.uniform_pq(n, p, p, directed=directed))
        )
    return tuple(mechs)


@dataclass
class FitRecord:
    mechanism: str
    mech_index: int
    method: str
    replicate: int
    theta: np.ndarray | None
    std_errors: np.ndarray | None
    converged: bool
    kl: float | None
    kl_raw: float | None
    error: str | None = None
    warnings: tuple[str, ...] = ()

    @property
    def usable(self) -> bool:
        return self.error is None and self.converged


@dataclass
class ExperimentReport:
    names: tuple[str, ...]
    reference: FitResult
    records: list[FitRecord] = field(default_factory=list)

    @property
    def excluded(self) -> int:
        return sum(1 for r in self.records if not r.usable)


def run_experiment(plan: ExperimentPlan) -> ExperimentReport:
    ref_cfg = replace(plan.fit, seed=derive_seed(plan.base_seed, "reference"))
    reference = mcmle_fit(plan.model, plan.graph, plan.attrs, cfg=ref_cfg)
    if not reference.converged:
        raise HarnessError("reference fit on the original graph did not converge")

    tasks = [
        (mi, name, gamma, b)
        for mi, (name, gamma) in enumerate(plan.mechanisms)
        for b in range(plan.replicates)
    ]

    def work(task):
        return _one_replicate(plan, reference.theta, *task)

    if plan.workers > 1:
        with ThreadPoolExecutor(max_workers=plan.workers) as pool:
            chunks = list(pool.map(work, tasks))
    else:
        chunks = [work(t) for t in tasks]

    method_rank = {m: k for k, m in enumerate(plan.methods)}
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda r: (r.mech_index, r.replicate, method_rank[r.method]))
    return ExperimentReport(names=reference.names, reference=reference, records=records)


def _one_replicate(plan: ExperimentPlan, theta_ref, mech_index, name, gamma, b):
    y = release(plan.graph, gamma, derive_seed(plan.base_seed, "release", mech_index, b))
    out = []
    for method in plan.methods:
        fit_cfg = replace(plan.fit, seed=derive_seed(plan.base_seed, "fit", method, mech_index, b))
        try:
            if method == "naive":
                fit = mcmle_fit(plan.model, y, plan.attrs, cfg=fit_cfg)
            else:
                fit = missing_data_fit(plan.model, y, gamma, plan.attrs, cfg=fit_cfg)
            kl_cfg = replace(plan.kl, seed=derive_seed(plan.base_seed, "kl", method, mech_index, b))
            kl = kl_utility(theta_ref, fit.theta, plan.graph, plan.model, plan.attrs, kl_cfg)
            out.append(
                FitRecord(
                    mechanism=name,
                    mech_index=mech_index,
                    method=method,
                    replicate=b,
                    theta=fit.theta,
                    std_errors=fit.std_errors,
                    converged=fit.converged,
                    kl=kl.value,
                    kl_raw=kl.raw,
                    warnings=fit.warnings,
                )
            )
        except InferenceError as exc:
            out.append(
                FitRecord(
                    mechanism=name,
                    mech_index=mech_index,
                    method=method,
                    replicate=b,
                    theta=None,
                    std_errors=None,
                    converged=False,
                    kl=None,
                    kl_raw=None,
                    error=str(exc),
                )
            )
    return out


# -- reduction ---------------------------------------------------------------


def summary_rows(report: ExperimentReport) -> list[dict]:
    """Per (mechanism, method, parameter): mean estimate, bias and MSE against
    the reference MLE, over usable replicates."""
    rows = []
    ref = report.reference.theta
    keys = sorted(
        {(r.mech_index, r.mechanism, r.method) for r in report.records},
        key=lambda k: (k[0], k[2]),
    )
    for mech_index, mechanism, method in keys:
        group = [
            r
            for r in report.records
            if r.mech_index == mech_index and r.method == method
        ]
        used = [r for r in group if r.usable]
        thetas = np.array([r.theta for r in used]) if used else None
        for k, name in enumerate(report.names):
            row = {
                "mechanism": mechanism,
                "method": method,
                "parameter": name,
                "reference_mle": ref[k],
                "n_used": len(used),
                "n_excluded": len(group) - len(used),
            }
            if used:
                est = thetas[:, k]
                row["mean_estimate"] = est.mean()
                row["bias"] = est.mean() - ref[k]
                row["mse"] = float(np.mean((est - ref[k]) ** 2))
            else:
                row["mean_estimate"] = row["bias"] = row["mse"] = None
            rows.append(row)
    return rows


_SUMMARY_COLS = (
    "mechanism",
    "method",
    "parameter",
    "reference_mle",
    "mean_estimate",
    "bias",
    "mse",
    "n_used",
    "n_excluded",
)
_KL_COLS = ("mechanism", "method", "replicate", "kl", "kl_raw", "converged")
_FITS_COLS = (
    "mechanism",
    "method",
    "replicate",
    "parameter",
    "estimate",
    "std_error",
    "converged",
)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool) or isinstance(v, np.bool_):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def summarize(report: ExperimentReport, out_dir) -> dict[str, Path]:
    """Write summary.csv, kl_long.csv and fits_long.csv under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "summary": out / "summary.csv",
        "kl_long": out / "kl_long.csv",
        "fits_long": out / "fits_long.csv",
    }

    with open(paths["summary"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_SUMMARY_COLS)
        for row in summary_rows(report):
            w.writerow([_cell(row[c]) for c in _SUMMARY_COLS])

    with open(paths["kl_long"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_KL_COLS)
        for r in report.records:
            if r.kl is None:
                continue
            w.writerow(
                [r.mechanism, r.method, r.replicate, _cell(r.kl), _cell(r.kl_raw), _cell(r.converged)]
            )

    with open(paths["fits_long"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_FITS_COLS)
        for r in report.records:
            if r.theta is None:
                continue
            for k, name in enumerate(report.names):
                w.writerow(
                    [
                        r.mechanism,
                        r.method,
                        r.replicate,
                        name,
                        _cell(float(r.theta[k])),
                        _cell(float(r.std_errors[k])),
                        _cell(r.converged),
                    ]
                )
    return paths
