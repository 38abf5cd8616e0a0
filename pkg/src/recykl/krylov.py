"""Preconditioned conjugate gradients augmented with a recycled subspace.

The central routine :func:`augmented_pcg` runs PCG while keeping every new
search direction A-orthogonal to a fixed augmenting basis Y.  The caller
supplies the starting coordinates in Y (normally the Galerkin solution over
range(Y)) and a handle that solves the reduced systems Y'AY mu = Y'Az; the
handle may backsolve cached Cholesky factors or run a nested augmented-CG
iteration in the reduced coordinates.  The final solution x0 + sum(alpha p)
is then the A-orthogonal projection of the exact solution onto the direct
sum of range(Y) and the generated Krylov directions.

Two direction updates are available.  ``mode="cg"`` keeps the classical
two-term recurrence.  ``mode="fom"`` re-orthogonalizes each new direction
against all previous ones, which guarantees a full-rank direction block in
finite precision; by default the coefficients are the explicit projections
-(p_i'Az)/gamma_i, with the cheaper ratio formula (r'z)/(r_i'z_i) available
via ``paper_fom_beta=True`` (the two coincide in exact arithmetic but only
the explicit form enforces A-orthogonality numerically).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import Breakdown, DimensionMismatch, NotConverged
from .linalg import (
    DenseLowerTriangular,
    InstrumentationSink,
    SparseSpdMatrix,
    dense_cholesky,
    spmv,
)

_BREAKDOWN_RTOL = 1e-14


class LinearOperator:
    """Symmetric positive-definite operator on R^dim."""

    dim: int

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class MatrixOperator(LinearOperator):
    """A sparse SPD matrix acting as an operator, charging a shared sink."""

    def __init__(self, A: SparseSpdMatrix, sink: InstrumentationSink | None = None):
        self.A = A
        self.sink = sink
        self.dim = A.n

    def apply(self, x):
        return spmv(self.A, x, self.sink)


class ReducedSpdOperator(LinearOperator):
    """Implicit reduced operator p -> Y'(A(Yp)).

    The reduced matrix Y'AY is never materialized; each application costs a
    single sparse matvec.  With ``record_products=True`` the operator keeps,
    for every application, the full-space product A(Yp) and the reduced
    output Y'A(Yp) so later stages can reuse them as cached cross terms.
    """

    def __init__(self, A: SparseSpdMatrix, Y: np.ndarray, sink=None, record_products=False):
        self.A = A
        self.Y = np.asarray(Y, dtype=np.float64)
        self.sink = sink
        self.dim = self.Y.shape[1]
        self.full_products: list[np.ndarray] | None = [] if record_products else None
        self.reduced_products: list[np.ndarray] | None = [] if record_products else None

    def apply(self, p):
        full = spmv(self.A, self.Y @ p, self.sink)
        reduced = self.Y.T @ full
        if self.full_products is not None:
            self.full_products.append(full)
            self.reduced_products.append(reduced)
        return reduced


def _as_operator(op, sink):
    if isinstance(op, LinearOperator):
        return op
    if isinstance(op, SparseSpdMatrix):
        return MatrixOperator(op, sink)
    arr = np.asarray(op, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
        return MatrixOperator(SparseSpdMatrix.from_dense(arr), sink)
    raise DimensionMismatch("unsupported operator type")


class BlockDiagFactor:
    """Cholesky factor of a block-diagonal Gram matrix.

    Blocks are either a dense lower-triangular factor or the square root of
    a diagonal block, mirroring how the staged solver accumulates them: the
    stage-1 factor, then sqrt of the stage-2 direction Gram diagonal, then
    sqrt diagonals from successive inner projections.
    """

    def __init__(self):
        self._blocks: list[tuple[str, object]] = []
        self.size = 0

    def append_cholesky(self, factor: DenseLowerTriangular):
        self._blocks.append(("chol", factor))
        self.size += factor.m

    def append_sqrt_diag(self, sqrt_diag: np.ndarray):
        sqrt_diag = np.asarray(sqrt_diag, dtype=np.float64)
        self._blocks.append(("sqrtdiag", sqrt_diag))
        self.size += sqrt_diag.shape[0]

    def solve_spd(self, rhs: np.ndarray) -> np.ndarray:
        if rhs.shape[0] != self.size:
            raise DimensionMismatch("block factor: rhs length mismatch")
        out = np.empty_like(rhs, dtype=np.float64)
        at = 0
        for kind, block in self._blocks:
            if kind == "chol":
                m = block.m
                out[at : at + m] = block.solve_spd(rhs[at : at + m])
            else:
                m = block.shape[0]
                out[at : at + m] = rhs[at : at + m] / (block * block)
            at += m
        return out


class DirectReducedProjection:
    """Reduced solves mu = (B'AB)^{-1} B'Az from cached products.

    ``cross`` holds A*B (in whatever space the operator acts), so B'Az is the
    dense product cross' z and no operator application is needed; ``factor``
    inverts the Gram matrix B'AB.
    """

    def __init__(self, cross: np.ndarray, factor):
        self.cross = np.asarray(cross, dtype=np.float64)
        self.factor = factor

    @classmethod
    def assemble(cls, op: LinearOperator, B: np.ndarray) -> "DirectReducedProjection":
        """Form A*B with operator applications and factorize B'AB."""
        B = np.asarray(B, dtype=np.float64)
        cross = np.column_stack([op.apply(B[:, i]) for i in range(B.shape[1])]) if B.shape[1] else np.zeros((B.shape[0], 0))
        gram = B.T @ cross
        return cls(cross, dense_cholesky(0.5 * (gram + gram.T)))

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return self.factor.solve_spd(self.cross.T @ z)


@dataclass
class AugmentedPcgResult:
    """Outputs of one augmented-PCG run.

    ``x`` is the final iterate in the run's own coordinates (the caller adds
    any outer centering); it equals Y @ yhat0 + V @ vhat.  ``gamma`` holds
    the diagonal p'Ap values of the A-orthogonal direction block V.
    """

    k: int
    vhat: np.ndarray
    V: np.ndarray
    gamma: np.ndarray
    residual_history: np.ndarray
    x: np.ndarray
    converged: bool = True

    @property
    def final_residual(self) -> float:
        return float(self.residual_history[-1])


def augmented_pcg(
    op,
    b,
    yhat0=None,
    aug_basis=None,
    reduced_solver=None,
    precond=None,
    tol: float = 0.0,
    *,
    mode: str = "cg",
    paper_fom_beta: bool = False,
    relative: bool = False,
    max_iter: int | None = None,
    sink: InstrumentationSink | None = None,
    r0: np.ndarray | None = None,
    monitor=None,
) -> AugmentedPcgResult:
    """Augmented preconditioned CG over the affine space Y yhat0 + directions.

    Parameters
    ----------
    op : SparseSpdMatrix or LinearOperator
        The SPD system operator.
    b : array
        Right-hand side (already centered by the caller when solving around
        an initial guess).
    yhat0 : array or None
        Starting coordinates in the augmenting basis; required when
        ``aug_basis`` is nonempty.  Normally the Galerkin solution over
        range(Y) so that the entry residual is Y-orthogonal.
    aug_basis : array (dim x m) or None
        Augmenting basis Y.  New directions are kept A-orthogonal to it.
    reduced_solver : callable or None
        Handle solving Y'AY mu = Y'Az given z.  Defaults to a direct
        factorization assembled with m operator applications.
    precond : Preconditioner or None
        Applied as z = M^{-1} r; None means unpreconditioned (and charges no
        preconditioner applications).
    tol : float
        Exit threshold on ||r||_2, absolute unless ``relative`` is set, in
        which case the threshold is tol * ||b||_2.
    r0 : array, optional
        Entry residual b - A (Y yhat0) when the caller can compute it from
        cached products; skips one operator application.
    monitor : callable, optional
        Called as monitor(k, x_k) at entry (k=0) and after every iteration.

    Raises
    ------
    NotConverged
        Iteration budget exhausted; carries the partial result.
    Breakdown
        Nonpositive direction curvature p'Ap.
    """
    operator = _as_operator(op, sink)
    n = operator.dim
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != n:
        raise DimensionMismatch("augmented_pcg: rhs length mismatch")

    Y = None
    if aug_basis is not None:
        Y = np.asarray(aug_basis, dtype=np.float64)
        if Y.ndim != 2 or Y.shape[0] != n:
            raise DimensionMismatch("augmented_pcg: basis shape mismatch")
        if Y.shape[1] == 0:
            Y = None
    if Y is not None:
        if yhat0 is None:
            raise DimensionMismatch("augmented_pcg: yhat0 required with a nonempty basis")
        yhat0 = np.asarray(yhat0, dtype=np.float64)
        if yhat0.shape[0] != Y.shape[1]:
            raise DimensionMismatch("augmented_pcg: yhat0 length mismatch")
        x = Y @ yhat0
        if reduced_solver is None:
            reduced_solver = DirectReducedProjection.assemble(operator, Y)
    else:
        x = np.zeros(n)

    if r0 is not None:
        r = np.array(r0, dtype=np.float64)
    elif Y is not None and np.any(x):
        r = b - operator.apply(x)
    else:
        r = b.copy()

    threshold = tol * np.linalg.norm(b) if relative else tol
    history = [float(np.linalg.norm(r))]
    if monitor is not None:
        monitor(0, x.copy())

    def result(k, alphas, dirs, gammas, converged):
        V = np.column_stack(dirs) if dirs else np.zeros((n, 0))
        return AugmentedPcgResult(
            k=k,
            vhat=np.asarray(alphas, dtype=np.float64),
            V=V,
            gamma=np.asarray(gammas, dtype=np.float64),
            residual_history=np.asarray(history),
            x=x,
            converged=converged,
        )

    if history[0] <= threshold:
        return result(0, [], [], [], True)

    if max_iter is None:
        max_iter = n

    z = precond.apply(r, sink) if precond is not None else r.copy()
    p = z - Y @ reduced_solver(z) if Y is not None else z.copy()
    rz = float(r @ z)

    alphas: list[float] = []
    dirs: list[np.ndarray] = []
    gammas: list[float] = []
    a_dirs: list[np.ndarray] = []  # cached A p_i, used by explicit FOM orthogonalization
    rz_hist: list[float] = []

    for k in range(max_iter):
        Ap = operator.apply(p)
        gamma = float(p @ Ap)
        if not np.isfinite(gamma) or gamma <= _BREAKDOWN_RTOL * float(p @ p):
            raise Breakdown(f"direction curvature {gamma:.3e} at iteration {k}")
        alpha = rz / gamma
        x = x + alpha * p
        r = r - alpha * Ap
        alphas.append(alpha)
        dirs.append(p)
        gammas.append(gamma)
        rz_hist.append(rz)
        if mode == "fom":
            a_dirs.append(Ap)
        history.append(float(np.linalg.norm(r)))
        if monitor is not None:
            monitor(k + 1, x.copy())
        if history[-1] <= threshold:
            return result(k + 1, alphas, dirs, gammas, True)

        z = precond.apply(r, sink) if precond is not None else r.copy()
        rz_next = float(r @ z)
        mu = reduced_solver(z) if Y is not None else None
        if mode == "cg":
            p = z + (rz_next / rz) * p
            if Y is not None:
                p -= Y @ mu
        elif mode == "fom":
            p = z - Y @ mu if Y is not None else z.copy()
            if paper_fom_beta:
                for i in range(len(dirs)):
                    p = p + (rz_next / rz_hist[i]) * dirs[i]
            else:
                # two modified-Gram-Schmidt sweeps keep the direction block
                # A-orthogonal even for badly conditioned operators
                for _ in range(2):
                    for i in range(len(dirs)):
                        p = p - (float(a_dirs[i] @ p) / gammas[i]) * dirs[i]
        else:
            raise ValueError(f"unknown mode {mode!r}")
        rz = rz_next

    raise NotConverged(
        f"no convergence to {threshold:.3e} within {max_iter} iterations",
        partial=result(max_iter, alphas, dirs, gammas, False),
    )


def pcg(
    A,
    b,
    x0=None,
    precond=None,
    tol: float = 0.0,
    max_iter: int | None = None,
    *,
    mode: str = "cg",
    relative: bool = False,
    sink: InstrumentationSink | None = None,
    monitor=None,
) -> AugmentedPcgResult:
    """Plain PCG; the empty-basis special case of :func:`augmented_pcg`.

    ``x0`` is a full-space initial guess; the returned ``x`` is the full
    solution (guess plus increment).
    """
    operator = _as_operator(A, sink)
    b = np.asarray(b, dtype=np.float64)
    shift = None
    rhs = b
    if x0 is not None:
        x0 = np.asarray(x0, dtype=np.float64)
        if np.any(x0):
            rhs = b - operator.apply(x0)
            shift = x0
    try:
        res = augmented_pcg(
            operator, rhs, precond=precond, tol=tol, max_iter=max_iter, mode=mode,
            relative=relative, sink=sink, monitor=monitor,
        )
    except NotConverged as exc:
        if shift is not None and exc.partial is not None:
            exc.partial.x = exc.partial.x + shift
        raise
    if shift is not None:
        res.x = res.x + shift
    return res


@dataclass
class DirectSolveResult:
    what: np.ndarray
    rhat: DenseLowerTriangular
    aw: np.ndarray  # cached product A @ W for downstream reuse


def direct_reduced_solve(
    A: SparseSpdMatrix, b, W, sink: InstrumentationSink | None = None
) -> DirectSolveResult:
    """Galerkin solve over range(W) by dense Cholesky of W'AW.

    Returns the reduced solution (W'AW)^{-1} W'b together with the factor and
    the product A*W (one matvec per column, charged to the sink).
    """
    from .linalg import assemble_gram

    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64)
    gram, AW = assemble_gram(A, W, sink)
    rhat = dense_cholesky(0.5 * (gram + gram.T))
    what = rhat.solve_spd(W.T @ b)
    return DirectSolveResult(what=what, rhat=rhat, aw=AW)
