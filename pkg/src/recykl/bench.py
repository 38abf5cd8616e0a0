"""Benchmark protocol: method rosters, runners, and report writers.

A method is a named solver configuration (truncation shape, tolerances,
preconditioner).  Methods run over a shared immutable sequence, optionally
in a thread pool, and their per-system reports land in CSV/JSON files: one
row per (method, system) with the three cost metrics, per-iteration
residual histories, and per-method averages.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg

from . import preconditioners
from .errors import RecyklError
from .pod import pod_evd
from .problems import SystemSequence
from .threestage import (
    RecycleState,
    SolveReport,
    SolverConfig,
    StageTolerances,
    run_sequence,
    solve_system,
    summarize_reports,
)
from .truncation import TruncationConfig, parse_strategy
from .weights import weights_ideal, weights_previous, weights_rbf

TOL_SWEEP = tuple(10.0 ** (-k) for k in range(1, 7))


@dataclass
class MethodSpec:
    """Named solver configuration for a benchmark run."""

    name: str
    config: SolverConfig
    precond: str = "identity"
    eps_hat_factor: float = 1e-4
    eps_inner_factor: float = 1e-2

    def tolerance_schedule(self):
        def schedule(j, tol):
            return StageTolerances(
                eps=tol,
                eps_hat=self.eps_hat_factor * tol,
                eps_inner=self.eps_inner_factor * tol,
            )

        return schedule

    def precond_factory(self):
        if self.precond in (None, "identity"):
            return None
        return lambda A: preconditioners.build(self.precond, A)

    @classmethod
    def from_dict(cls, raw: dict) -> "MethodSpec":
        try:
            name = raw["name"]
        except KeyError as exc:
            raise RecyklError("method spec needs a 'name'") from exc
        tr_raw = dict(raw.get("truncation", {}))
        if "strategy" in tr_raw:
            tr_raw.update(parse_strategy(tr_raw.pop("strategy")))
        if tr_raw.get("storage_cap") in ("inf", None):
            tr_raw["storage_cap"] = math.inf
        cfg = SolverConfig(
            truncation=TruncationConfig(**tr_raw),
            mode=raw.get("mode", "fom"),
            recycle=raw.get("recycle", True),
            diagnostics=raw.get("diagnostics", False),
            max_iter=raw.get("max_iter"),
            rbf_window=raw.get("rbf_window"),
        )
        tols = raw.get("tolerances", {})
        return cls(
            name=name,
            config=cfg,
            precond=raw.get("precond", "identity"),
            eps_hat_factor=tols.get("eps_hat_factor", 1e-4),
            eps_inner_factor=tols.get("eps_inner_factor", 1e-2),
        )


def default_methods(
    storage_cap: int = 50,
    retained: int | None = None,
    stage1_small: int = 5,
    precond: str = "identity",
    mode: str = "fom",
    include_output_metric: bool = False,
) -> list[MethodSpec]:
    """The standard comparison roster at a given storage budget."""
    retained = storage_cap // 2 if retained is None else retained
    small = min(stage1_small, retained)

    def spec(name, **tr):
        recycle = tr.pop("recycle", True)
        return MethodSpec(
            name=name,
            config=SolverConfig(
                truncation=TruncationConfig(**tr), mode=mode, recycle=recycle
            ),
            precond=precond,
        )

    pod_kw = dict(nu_y=1.0, nu_w=1.0, storage_cap=storage_cap, max_dim=retained)
    methods = [
        spec("pcg", recycle=False),
        spec("no-trunc", strategy="none", storage_cap=math.inf),
        spec(f"df({retained},0)", strategy="deflate", deflate_dim=retained,
             storage_cap=storage_cap),
        spec(f"pod({retained},0)", strategy="pod-a-rbf", **pod_kw),
        spec(f"pod({small},{retained - small})", strategy="pod-a-rbf",
             stage1_dim=small, **pod_kw),
        spec(f"pod({small},{retained - small})it", strategy="pod-a-rbf",
             stage1_dim=small, full_orth=True, **pod_kw),
    ]
    if include_output_metric:
        methods += [
            spec(f"pod-ctc({retained},0)", strategy="pod-ctc-rbf", **pod_kw),
            spec(f"pod-ctc({small},{retained - small})", strategy="pod-ctc-rbf",
                 stage1_dim=small, **pod_kw),
            spec(f"pod-ctc({small},{retained - small})it", strategy="pod-ctc-rbf",
                 stage1_dim=small, full_orth=True, **pod_kw),
        ]
    return methods


def load_methods_file(path) -> list[MethodSpec]:
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise RecyklError(f"{path}: methods file must hold a JSON list")
    return [MethodSpec.from_dict(entry) for entry in raw]


@dataclass
class MethodRun:
    method: MethodSpec
    reports: list[SolveReport]
    solutions: list[np.ndarray] | None = None
    traces: list | None = None

    @property
    def summary(self) -> dict:
        return summarize_reports(self.reports)


def run_methods(
    seq: SystemSequence,
    methods: list[MethodSpec],
    *,
    threads: int = 1,
    keep_solutions: bool = False,
    keep_trace: bool = False,
    track_iterates: bool = False,
    tol_override: float | None = None,
) -> list[MethodRun]:
    """Run every method over the shared sequence, optionally in parallel."""

    seq_used = seq
    if tol_override is not None:
        from .problems import LinearSystemSpec

        seq_used = SystemSequence(
            n=seq.n,
            systems=[
                LinearSystemSpec(s.A, s.b, s.xbar, tol_override) for s in seq.systems
            ],
            C=seq.C,
            metadata=seq.metadata,
        )

    def one(method: MethodSpec) -> MethodRun:
        sols, reports, traces = run_sequence(
            seq_used,
            method.config,
            tolerance_schedule=method.tolerance_schedule(),
            precond_factory=method.precond_factory(),
            stop_on_failure=False,
            keep_trace=keep_trace,
            track_iterates=track_iterates,
        )
        return MethodRun(
            method=method,
            reports=reports,
            solutions=sols if (keep_solutions or track_iterates) else None,
            traces=traces,
        )

    if threads <= 1 or len(methods) <= 1:
        return [one(m) for m in methods]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, methods))


CSV_FIELDS = (
    "method", "j", "matvecs", "precond_apps", "stage1_dim", "stage2_iters",
    "stage3_iters", "wall_ms", "final_residual",
)


def write_run_outputs(runs: list[MethodRun], out_dir, label: str = "run") -> dict:
    """Write per-system CSV, residual histories, and a JSON summary."""
    os.makedirs(out_dir, exist_ok=True)
    rows_path = os.path.join(out_dir, f"{label}_systems.csv")
    with open(rows_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for run in runs:
            for r in run.reports:
                writer.writerow({
                    "method": run.method.name,
                    "j": r.j,
                    "matvecs": r.matvecs,
                    "precond_apps": r.precond_applies,
                    "stage1_dim": r.stage1_dim,
                    "stage2_iters": r.stage2_iters,
                    "stage3_iters": r.stage3_iters,
                    "wall_ms": round(1e3 * r.wall_time, 3),
                    "final_residual": r.final_residual,
                })
    hist_path = os.path.join(out_dir, f"{label}_residuals.csv")
    with open(hist_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "j", "k", "residual"])
        for run in runs:
            for r in run.reports:
                if r.residual_history is None:
                    continue
                for k, val in enumerate(r.residual_history):
                    writer.writerow([run.method.name, r.j, k, val])
    summary = {run.method.name: run.summary for run in runs}
    summary_path = os.path.join(out_dir, f"{label}_summary.json")
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return {"systems": rows_path, "residuals": hist_path, "summary": summary_path}


# ---------------------------------------------------------------------------
# output-oriented error tracking


def dense_solutions(seq: SystemSequence) -> list[np.ndarray]:
    return [
        scipy.sparse.linalg.spsolve(s.A.to_scipy().tocsc(), s.b) for s in seq.systems
    ]


def output_error_run(
    seq: SystemSequence,
    methods: list[MethodSpec],
    taus,
    *,
    threads: int = 1,
) -> list[dict]:
    """Average cost for the output-norm error to first fall below each tau.

    The output error ||C (x* - x)||_2 is evaluated at every checkpoint the
    staged solver passes (start, after stage 1, after stage 2, and each
    stage-3 iterate); per tau the first checkpoint meeting it is charged.
    Averages below one preconditioner application mean the threshold was
    typically met before stage 3.
    """
    if seq.C is None:
        raise RecyklError("output-error runs need the sequence's output matrix")
    xstars = dense_solutions(seq)
    runs = run_methods(seq, methods, threads=threads, track_iterates=True)
    rows = []
    for run in runs:
        per_tau = {tau: {"matvecs": [], "precond": [], "wall": [], "met": 0} for tau in taus}
        for r, xstar in zip(run.reports, xstars):
            errs = [
                (cp, float(np.linalg.norm(seq.C @ (xstar - cp.x))))
                for cp in (r.checkpoints or [])
            ]
            for tau in taus:
                hit = next((cp for cp, e in errs if e < tau), None)
                if hit is not None:
                    per_tau[tau]["matvecs"].append(hit.matvecs)
                    per_tau[tau]["precond"].append(hit.precond_applies)
                    per_tau[tau]["wall"].append(hit.wall_time)
                    per_tau[tau]["met"] += 1
        for tau in taus:
            bucket = per_tau[tau]
            count = max(1, len(bucket["matvecs"]))
            rows.append({
                "method": run.method.name,
                "tau": tau,
                "avg_matvecs": float(np.sum(bucket["matvecs"])) / count,
                "avg_precond_apps": float(np.sum(bucket["precond"])) / count,
                "avg_wall_ms": 1e3 * float(np.sum(bucket["wall"])) / count,
                "systems_met": bucket["met"],
                "systems": len(run.reports),
            })
    return rows


# ---------------------------------------------------------------------------
# weight-scheme study


def weight_study(
    seq: SystemSequence,
    *,
    dims=None,
    warmup: int = 10,
    mode: str = "fom",
    precond: str = "identity",
    schemes=("ideal", "prev", "rbf"),
) -> list[dict]:
    """Compare weight schemes by truncating after a warmup stretch.

    The first ``warmup`` systems accumulate directions without truncation;
    the accumulated block is then POD-truncated in the metric of the last
    solved matrix to each dimension in ``dims``, and the following system is
    solved from that basis: recorded are the residual after stages 1-2 and
    the stage-3 iteration count.
    """
    if seq.p < warmup + 1:
        raise RecyklError("weight study needs at least warmup+1 systems")
    accumulate_cfg = SolverConfig(
        truncation=TruncationConfig(strategy="none", nu_w=1.0), mode=mode
    )
    pf = None if precond == "identity" else (lambda A: preconditioners.build(precond, A))
    state = RecycleState.empty(seq.n)
    for spec in seq.systems[:warmup]:
        _, report, state = solve_system(
            spec.A, spec.b, spec.xbar, state,
            StageTolerances(spec.tol), accumulate_cfg,
            M=pf(spec.A) if pf else None,
        )
        if not report.converged:
            raise RecyklError(f"warmup system {report.j} did not converge")
    Z = state.Y
    A_last = seq.systems[warmup - 1].A
    target = seq.systems[warmup]
    if dims is None:
        top = min(Z.shape[1], 40)
        dims = list(range(2, top + 1, max(1, top // 12)))

    weight_vectors = {}
    for scheme in schemes:
        if scheme == "ideal":
            weight_vectors[scheme] = weights_ideal(Z, target.A, target.b, target.xbar)
        elif scheme == "prev":
            weight_vectors[scheme] = weights_previous(state.history)
        elif scheme == "rbf":
            weight_vectors[scheme] = weights_rbf(state.history, len(state.history))
        else:
            raise RecyklError(f"unknown scheme {scheme!r}")

    rows = []
    solve_cfg = SolverConfig(truncation=TruncationConfig(strategy="none", nu_w=1.0), mode=mode)
    for scheme, gamma in weight_vectors.items():
        pod = pod_evd(Z, gamma, A_last, eps=1.0)
        for k in dims:
            k_eff = min(k, pod.columns.shape[1])
            basis = pod.columns[:, :k_eff]
            trial = RecycleState(n=seq.n, Y=basis, stage1_idx=list(range(k_eff)),
                                 systems_seen=warmup)
            _, report, _ = solve_system(
                target.A, target.b, target.xbar, trial,
                StageTolerances(target.tol), solve_cfg,
                M=pf(target.A) if pf else None,
            )
            rows.append({
                "scheme": scheme,
                "dim": k_eff,
                "stage2_residual": float(report.residual_history[0]),
                "stage3_iters": report.stage3_iters,
            })
    return rows


def write_rows_csv(rows: list[dict], path) -> None:
    if not rows:
        raise RecyklError("nothing to write")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
