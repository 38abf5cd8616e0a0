"""Hybrid direct/iterative solver for sequences of SPD systems.

Each system is attacked in three stages over the recycled basis Y carried
across the sequence:

1. a direct Galerkin solve over the stage-1 block W (a few columns of Y
   expected to capture most of the solution), factored once and reused;
2. an unpreconditioned augmented-CG solve over all of Y through the
   implicit reduced operator p -> Y'(A(Yp)) (the reduced matrix is never
   formed), augmented with W so the stage-1 factor keeps doing the
   projections;
3. full-space augmented PCG to the forcing tolerance, orthogonalizing new
   directions either against [W, stage-2 directions] with the cached block
   factor, or (``full_orth``) against the entire Y, each projection solved
   by a nested augmented-CG run whose factor grows block by block.

After the solve, new search directions are appended to Y normalized to unit
A-norm; once the block exceeds the storage cap it is compressed by the
configured truncation strategy and the stage-1 prefix is re-derived.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NotConverged
from .krylov import (
    AugmentedPcgResult,
    BlockDiagFactor,
    DirectReducedProjection,
    ReducedSpdOperator,
    augmented_pcg,
    direct_reduced_solve,
)
from .linalg import InstrumentationSink, SparseSpdMatrix, assemble_gram, spmv, symmetric_evd
from .preconditioners import Preconditioner
from .truncation import TruncationConfig, compress
from .weights import WeightHistory, weights_previous, weights_rbf


@dataclass
class StageTolerances:
    """Forcing value plus the stage-2 and inner-solve tolerances.

    Unset stage tolerances follow the defaults eps_hat = 1e-4 * eps and
    eps_inner = 1e-2 * eps.
    """

    eps: float
    eps_hat: float | None = None
    eps_inner: float | None = None

    def resolved(self) -> tuple[float, float, float]:
        eps = float(self.eps)
        eps_hat = 1e-4 * eps if self.eps_hat is None else float(self.eps_hat)
        eps_inner = 1e-2 * eps if self.eps_inner is None else float(self.eps_inner)
        return eps, eps_hat, eps_inner


@dataclass
class SolverConfig:
    """Method configuration: truncation shape, recurrence mode, extras."""

    truncation: TruncationConfig = field(default_factory=TruncationConfig)
    mode: str = "fom"
    recycle: bool = True
    diagnostics: bool = False
    max_iter: int | None = None
    rbf_window: int | None = None


@dataclass
class RecycleState:
    """Durable solver state carried from one system to the next."""

    n: int
    Y: np.ndarray
    stage1_idx: list[int] = field(default_factory=list)
    last_trunc_index: int = 0
    systems_seen: int = 0
    history: WeightHistory = field(default_factory=WeightHistory)

    @classmethod
    def empty(cls, n: int) -> "RecycleState":
        return cls(n=n, Y=np.zeros((n, 0)))

    @property
    def basis_dim(self) -> int:
        return self.Y.shape[1]


@dataclass
class Checkpoint:
    stage: str
    iteration: int
    matvecs: int
    precond_applies: int
    wall_time: float
    x: np.ndarray


@dataclass
class SolveReport:
    j: int
    matvecs: int = 0
    precond_applies: int = 0
    stage1_dim: int = 0
    stage2_iters: int = 0
    stage3_iters: int = 0
    wall_time: float = 0.0
    final_residual: float = float("nan")
    residual_history: np.ndarray | None = None
    stage2_residual_history: np.ndarray | None = None
    basis_dim: int = 0
    truncated: bool = False
    converged: bool = True
    stage2_converged: bool = True
    reduced_condition: float | None = None
    checkpoints: list[Checkpoint] | None = None


@dataclass
class SystemTrace:
    """Per-system record of the internal bases, for verification harnesses."""

    j: int
    A: SparseSpdMatrix
    b: np.ndarray
    xbar: np.ndarray | None
    eps: float
    Y_entry: np.ndarray
    stage1_idx: list[int]
    stage3_basis: np.ndarray
    stage3_start: np.ndarray
    Y_exit: np.ndarray
    last_trunc_index: int
    truncated: bool


class InnerIterativeProjection:
    """Reduced solves Y'AY mu = Y'Az by nested augmented CG.

    The nested runs are augmented with every block already understood in
    reduced coordinates: the stage-1 selection, the stage-2 directions, and
    the direction blocks of earlier projections, whose Gram factor is block
    diagonal and grows by one sqrt-diagonal block per call.
    """

    def __init__(
        self,
        A: SparseSpdMatrix,
        Y: np.ndarray,
        sink: InstrumentationSink | None,
        tol: float,
        mode: str,
        max_iter: int | None = None,
    ):
        self.A = A
        self.Y = Y
        self.sink = sink
        self.tol = tol
        self.mode = mode
        self.max_iter = max_iter if max_iter is not None else 3 * Y.shape[1] + 10
        self.op = ReducedSpdOperator(A, Y, sink=sink, record_products=True)
        self.factor = BlockDiagFactor()
        self._basis_blocks: list[np.ndarray] = []
        self._cross_blocks: list[np.ndarray] = []
        self.inner_iterations = 0

    def add_block(self, basis_block: np.ndarray, cross_block: np.ndarray, factor_block) -> None:
        if basis_block.shape[1] == 0:
            return
        self._basis_blocks.append(basis_block)
        self._cross_blocks.append(cross_block)
        kind, payload = factor_block
        if kind == "chol":
            self.factor.append_cholesky(payload)
        else:
            self.factor.append_sqrt_diag(payload)

    def _stacked(self):
        y = self.Y.shape[1]
        if not self._basis_blocks:
            return np.zeros((y, 0)), np.zeros((y, 0))
        return np.hstack(self._basis_blocks), np.hstack(self._cross_blocks)

    def __call__(self, z: np.ndarray) -> np.ndarray:
        bhat = self.Y.T @ spmv(self.A, z, self.sink)
        B, cross = self._stacked()
        tol = max(self.tol, 1e-13 * float(np.linalg.norm(bhat)))
        if B.shape[1]:
            ybase = self.factor.solve_spd(B.T @ bhat)
            r0 = bhat - cross @ ybase
            handle = DirectReducedProjection(cross, self.factor)
        else:
            ybase, r0, handle = None, bhat.copy(), None
        mark = len(self.op.reduced_products)
        try:
            res = augmented_pcg(
                self.op,
                bhat,
                ybase,
                B if B.shape[1] else None,
                handle,
                None,
                tol,
                mode=self.mode,
                max_iter=self.max_iter,
                r0=r0,
            )
        except NotConverged as exc:
            res = exc.partial
        self.inner_iterations += res.k
        if res.k > 0:
            new_cross = np.column_stack(self.op.reduced_products[mark : mark + res.k])
            self.add_block(res.V, new_cross, ("sqrtdiag", np.sqrt(res.gamma)))
        return res.x


def _plain_stage3(A, rhs, eps, cfg, M, sink, monitor):
    return augmented_pcg(
        A, rhs, tol=eps, precond=M, mode=cfg.mode, sink=sink,
        max_iter=cfg.max_iter, monitor=monitor,
    )


def solve_system(
    A: SparseSpdMatrix,
    b: np.ndarray,
    xbar: np.ndarray | None,
    state: RecycleState,
    tolerances: StageTolerances,
    cfg: SolverConfig,
    M: Preconditioner | None = None,
    sink: InstrumentationSink | None = None,
    chalf: np.ndarray | None = None,
    track_iterates: bool = False,
    trace_out: list | None = None,
) -> tuple[np.ndarray, SolveReport, RecycleState]:
    """Solve one system of the sequence and fold its directions into state.

    Returns the solution, a report of per-stage costs, and the updated
    state.  ``chalf`` supplies the output matrix for output-metric
    truncation strategies.  When stage 3 runs out of iterations a
    NotConverged report is produced (never an exception); the partial
    solution still updates the state so the sequence can continue.
    """
    if sink is None:
        sink = InstrumentationSink()
    t0 = time.perf_counter()
    j = state.systems_seen + 1
    report = SolveReport(j=j, basis_dim=state.basis_dim)
    checkpoints: list[Checkpoint] = [] if track_iterates else None

    def record(stage, iteration, x):
        if checkpoints is not None:
            snap = sink.snapshot()
            checkpoints.append(
                Checkpoint(
                    stage=stage,
                    iteration=iteration,
                    matvecs=snap["matvecs"],
                    precond_applies=snap["precond_applies"],
                    wall_time=time.perf_counter() - t0,
                    x=np.asarray(x, dtype=np.float64).copy(),
                )
            )

    b = np.asarray(b, dtype=np.float64)
    if xbar is not None:
        xbar = np.asarray(xbar, dtype=np.float64)
        if not np.any(xbar):
            xbar = None
    r0 = b - spmv(A, xbar, sink) if xbar is not None else b.copy()
    eps, eps_hat, eps_inner = tolerances.resolved()
    record("start", 0, xbar if xbar is not None else np.zeros(A.n))

    y = state.basis_dim
    Y = state.Y
    stage3_res: AugmentedPcgResult

    def add_center(x):
        return x if xbar is None else xbar + x

    if y == 0 or not cfg.recycle:
        monitor = (lambda k, x: record("stage3", k, add_center(x))) if track_iterates else None
        try:
            stage3_res = _plain_stage3(A, r0, eps, cfg, M, sink, monitor)
        except NotConverged as exc:
            stage3_res = exc.partial
            report.converged = False
        stage3_basis = np.zeros((A.n, 0))
        stage3_start = np.zeros(0)
        yhat_comb = np.zeros(0)
        stage1_gram = None
        idx: list[int] = []
    else:
        idx = list(state.stage1_idx)
        W = Y[:, idx]
        w = len(idx)

        # stage 1: direct solve over W, factor cached for every later stage
        stage1 = direct_reduced_solve(A, r0, W, sink)
        what, rhat, AW = stage1.what, stage1.rhat, stage1.aw
        stage1_gram = rhat.full() @ rhat.full().T if w == y else None
        record("stage1", 0, add_center(W @ what))

        if cfg.diagnostics:
            gram_diag, _ = assemble_gram(A, Y, None)
            eigs, _ = symmetric_evd(0.5 * (gram_diag + gram_diag.T))
            report.reduced_condition = float(eigs[0] / eigs[-1]) if eigs[-1] > 0 else float("inf")

        # stage 2: iterate over all of Y through the implicit reduced
        # operator, augmented with the stage-1 selection block
        if y > w:
            What = np.eye(y)[:, idx]
            cross_w = Y.T @ AW
            reduced_op = ReducedSpdOperator(A, Y, sink=sink, record_products=True)
            bhat = Y.T @ r0
            r0_hat = bhat - cross_w @ what
            try:
                stage2_res = augmented_pcg(
                    reduced_op,
                    bhat,
                    what,
                    What,
                    DirectReducedProjection(cross_w, rhat),
                    None,
                    eps_hat,
                    mode=cfg.mode,
                    max_iter=3 * y + 10,
                    r0=r0_hat,
                )
            except NotConverged as exc:
                stage2_res = exc.partial
                report.stage2_converged = False
            yhat_comb = stage2_res.x
            vhat2 = stage2_res.vhat
            Phat = stage2_res.V
            gamma_hat = stage2_res.gamma
            AVhat = (
                np.column_stack(reduced_op.full_products[: stage2_res.k])
                if stage2_res.k
                else np.zeros((A.n, 0))
            )
            report.stage2_iters = stage2_res.k
            report.stage2_residual_history = stage2_res.residual_history
        else:
            yhat_comb = np.zeros(y)
            yhat_comb[idx] = what
            vhat2 = np.zeros(0)
            Phat = np.zeros((y, 0))
            gamma_hat = np.zeros(0)
            AVhat = np.zeros((A.n, 0))
        record("stage2", 0, add_center(Y @ yhat_comb))

        monitor = (lambda k, x: record("stage3", k, add_center(x))) if track_iterates else None
        if not cfg.truncation.full_orth:
            # stage 3 over [W, stage-2 directions]; Gram factor is block
            # diagonal with blocks cached from stages 1 and 2
            Vhat_full = Y @ Phat if Phat.shape[1] else np.zeros((A.n, 0))
            stage3_basis = np.hstack([W, Vhat_full])
            cross3 = np.hstack([AW, AVhat])
            factor3 = BlockDiagFactor()
            factor3.append_cholesky(rhat)
            if gamma_hat.size:
                factor3.append_sqrt_diag(np.sqrt(gamma_hat))
            stage3_start = np.concatenate([what, vhat2])
            r0_3 = r0 - cross3 @ stage3_start
            try:
                stage3_res = augmented_pcg(
                    A,
                    r0,
                    stage3_start,
                    stage3_basis,
                    DirectReducedProjection(cross3, factor3),
                    M,
                    eps,
                    mode=cfg.mode,
                    sink=sink,
                    max_iter=cfg.max_iter,
                    r0=r0_3,
                    monitor=monitor,
                )
            except NotConverged as exc:
                stage3_res = exc.partial
                report.converged = False
        else:
            # stage 3 orthogonalizing against all of Y via nested solves
            projector = InnerIterativeProjection(A, Y, sink, eps_inner, cfg.mode)
            projector.add_block(np.eye(y)[:, idx], Y.T @ AW, ("chol", rhat))
            if Phat.shape[1]:
                projector.add_block(Phat, Y.T @ AVhat, ("sqrtdiag", np.sqrt(gamma_hat)))
            stage3_basis = Y
            stage3_start = yhat_comb
            r0_3 = r0 - AW @ what - (AVhat @ vhat2 if vhat2.size else 0.0)
            try:
                stage3_res = augmented_pcg(
                    A,
                    r0,
                    yhat_comb,
                    Y,
                    projector,
                    M,
                    eps,
                    mode=cfg.mode,
                    sink=sink,
                    max_iter=cfg.max_iter,
                    r0=r0_3,
                    monitor=monitor,
                )
            except NotConverged as exc:
                stage3_res = exc.partial
                report.converged = False

    x = add_center(stage3_res.x)
    report.stage1_dim = len(idx)
    report.stage3_iters = stage3_res.k
    report.final_residual = stage3_res.final_residual
    report.residual_history = stage3_res.residual_history
    report.checkpoints = checkpoints

    new_state, truncated = update_basis(
        state, yhat_comb, stage3_res, cfg, A, chalf=chalf, sink=sink,
        stage1_gram=stage1_gram,
    )
    report.truncated = truncated
    snap = sink.snapshot()
    report.matvecs = snap["matvecs"]
    report.precond_applies = snap["precond_applies"]
    report.wall_time = time.perf_counter() - t0
    if trace_out is not None:
        trace_out.append(
            SystemTrace(
                j=j,
                A=A,
                b=b,
                xbar=xbar,
                eps=eps,
                Y_entry=Y.copy(),
                stage1_idx=list(idx),
                stage3_basis=stage3_basis.copy(),
                stage3_start=stage3_start.copy(),
                Y_exit=new_state.Y.copy(),
                last_trunc_index=new_state.last_trunc_index,
                truncated=truncated,
            )
        )
    return x, report, new_state


def update_basis(
    state: RecycleState,
    yhat_comb: np.ndarray,
    stage3_res: AugmentedPcgResult,
    cfg: SolverConfig,
    A: SparseSpdMatrix,
    *,
    chalf: np.ndarray | None = None,
    sink: InstrumentationSink | None = None,
    stage1_gram: np.ndarray | None = None,
) -> tuple[RecycleState, bool]:
    """Fold the new directions into the recycled basis, truncating at the cap.

    New directions enter normalized to unit A-norm (columns divided by
    sqrt(p'Ap)); with threshold 1 they all join the stage-1 block, otherwise
    only those whose share of the direction Gram trace exceeds the
    threshold.  When the grown block exceeds the storage cap the configured
    compression runs with the metric of the just-solved matrix, the weight
    history re-expressed or reset, and the stage-1 prefix re-derived.
    """
    j = state.systems_seen + 1
    if not cfg.recycle:
        state.systems_seen = j
        return state, False
    tcfg = cfg.truncation
    k = stage3_res.k
    if k > 0:
        sqrt_t = np.sqrt(stage3_res.gamma)
        scaled = stage3_res.V / sqrt_t
        y_old = state.Y.shape[1]
        if tcfg.stage1_threshold >= 1.0:
            admitted = list(range(k))
        else:
            shares = stage3_res.gamma / np.sum(stage3_res.gamma)
            admitted = [i for i in range(k) if shares[i] > tcfg.stage1_threshold]
        Y_grown = np.hstack([state.Y, scaled]) if y_old else scaled
        stage1_idx = state.stage1_idx + [y_old + i for i in admitted]
        eta = np.concatenate([yhat_comb, stage3_res.vhat * sqrt_t])
    else:
        Y_grown = state.Y
        stage1_idx = list(state.stage1_idx)
        eta = yhat_comb.copy()
    if eta.size:
        state.history.push(eta)

    truncated = False
    if Y_grown.shape[1] > tcfg.storage_cap and tcfg.strategy != "none":
        weights = None
        if tcfg.strategy.startswith("pod"):
            if tcfg.weight_kind == "prev":
                weights = weights_previous(state.history)
            else:
                window = cfg.rbf_window if cfg.rbf_window is not None else len(state.history)
                weights = weights_rbf(state.history, window)
        gram = None
        reuse_blocks = (
            not tcfg.uses_output_metric
            and tcfg.strategy != "deflate"
            and stage1_gram is not None
            and cfg.mode == "fom"
            and k > 0
        )
        if reuse_blocks:
            # Z'AZ is already known blockwise: the stage-1 factor covers the
            # old basis, the full orthogonalization makes the new columns
            # A-orthonormal and A-orthogonal to it
            y_old = state.Y.shape[1]
            gram = np.zeros((y_old + k, y_old + k))
            gram[:y_old, :y_old] = stage1_gram
            gram[y_old:, y_old:] = np.eye(k)
        out = compress(
            Y_grown,
            tcfg,
            weights=weights,
            a_prev=A,
            chalf=chalf,
            current_stage1_width=len(stage1_idx),
            gram=gram,
            sink=sink,
        )
        if tcfg.keep_history and out.gram_zz is not None:
            state.history.reexpress(out.truncation_map, out.gram_zz)
        else:
            state.history.reset()
        state.Y = out.Y_new
        state.stage1_idx = list(range(out.stage1_width))
        state.last_trunc_index = j
        truncated = True
    else:
        state.Y = Y_grown
        state.stage1_idx = stage1_idx
    state.systems_seen = j
    return state, truncated


def run_sequence(
    seq,
    cfg: SolverConfig,
    tolerance_schedule=None,
    precond_factory=None,
    *,
    stop_on_failure: bool = True,
    keep_trace: bool = False,
    track_iterates: bool = False,
):
    """Drive the staged solver across a system sequence.

    ``tolerance_schedule`` maps (j, system tol) to StageTolerances;
    ``precond_factory`` maps a matrix to a Preconditioner (None means
    unpreconditioned).  Returns (solutions, reports, traces).
    """
    state = RecycleState.empty(seq.n)
    chalf = seq.C
    reports: list[SolveReport] = []
    solutions: list[np.ndarray] = []
    traces: list[SystemTrace] | None = [] if keep_trace else None
    for j, spec in enumerate(seq, start=1):
        tols = (
            tolerance_schedule(j, spec.tol)
            if tolerance_schedule is not None
            else StageTolerances(eps=spec.tol)
        )
        M = precond_factory(spec.A) if precond_factory is not None else None
        sink = InstrumentationSink()
        x, report, state = solve_system(
            spec.A,
            spec.b,
            spec.xbar,
            state,
            tols,
            cfg,
            M=M,
            sink=sink,
            chalf=chalf,
            track_iterates=track_iterates,
            trace_out=traces,
        )
        solutions.append(x)
        reports.append(report)
        if not report.converged and stop_on_failure:
            break
    return solutions, reports, traces


def summarize_reports(reports) -> dict:
    """Per-sequence averages of the three cost metrics plus iteration counts."""
    if not reports:
        return {}
    return {
        "systems": len(reports),
        "avg_matvecs": float(np.mean([r.matvecs for r in reports])),
        "avg_precond_applies": float(np.mean([r.precond_applies for r in reports])),
        "avg_wall_time": float(np.mean([r.wall_time for r in reports])),
        "avg_stage3_iters": float(np.mean([r.stage3_iters for r in reports])),
        "total_stage3_iters": int(np.sum([r.stage3_iters for r in reports])),
        "total_matvecs": int(np.sum([r.matvecs for r in reports])),
        "all_converged": bool(all(r.converged for r in reports)),
    }
