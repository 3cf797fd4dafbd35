"""Iterative and direct solution machinery for the block system.

Full (unrestarted) GMRES with optional left ILU(0) preconditioning and
true-residual reporting, the zero-fill incomplete LU factorization, Thomas
elimination for scalar tridiagonal systems, block UDL elimination through the
Schur-complement tail recursion, one-step block Jacobi/Gauss-Seidel splitting
sweeps in the permuted (grid-outer) ordering, and the shifted-system solver
that accumulates the partial-fraction combination.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from ._ilu_kernels import ilu0_factor, ilu0_solve
from .errors import (
    DimensionMismatch,
    SingularSchurComplement,
    SingularTridiagonalBlock,
    ZeroPivot,
)
from .linalg import CFOperator, kron_permutation, validate_csr
from .pencil import PartialFractionExpansion, PolyTridiag, TridiagPencil


@dataclass
class SolveReport:
    """Solution plus the per-iteration relative residual trail.

    ``residual_history[k]`` is the true-system relative residual after k
    iterations (entry 0 is the initial residual).  When a preconditioner is
    in play, ``preconditioned_history`` additionally records the quantity
    GMRES actually minimizes.
    """

    solution: np.ndarray
    residual_history: list
    iterations: int
    converged: bool
    preconditioned_history: list = field(default_factory=list)


class Preconditioner:
    """A fixed linear map applied on the left of the operator."""

    def __init__(self, kind: str, solve):
        self.kind = kind
        self._solve = solve

    def solve(self, b):
        return self._solve(b)


def ilu0(A) -> Preconditioner:
    """Incomplete LU with zero fill on the sparsity pattern of A.

    Every diagonal entry must be present in the pattern and every pivot
    nonzero, otherwise ZeroPivot reports the offending row.
    """
    A = validate_csr(A)
    n = A.shape[0]
    indptr = A.indptr.astype(np.int64)
    indices = A.indices.astype(np.int64)
    data = A.data.copy()
    diagptr = np.empty(n, dtype=np.int64)
    for i in range(n):
        row = indices[indptr[i] : indptr[i + 1]]
        j = int(np.searchsorted(row, i))
        if j >= len(row) or row[j] != i:
            raise ZeroPivot(i, f"row {i} has no diagonal entry in the pattern")
        diagptr[i] = indptr[i] + j
    bad = int(ilu0_factor(indptr, indices, data, diagptr))
    if bad >= 0:
        raise ZeroPivot(bad)

    def solve(b):
        b = np.asarray(b)
        dt = np.result_type(b.dtype, data.dtype)
        out = np.empty(n, dtype=dt)
        return ilu0_solve(indptr, indices, data.astype(dt, copy=False), diagptr, b.astype(dt, copy=False), out)

    return Preconditioner("ilu0", solve)


def _as_matvec(op):
    if callable(op) and not hasattr(op, "dot"):
        return op
    return op.dot


def gmres(
    op,
    b,
    M: Preconditioner | None = None,
    tol: float = 1e-12,
    maxit: int = 500,
    probe=None,
) -> SolveReport:
    """Full GMRES with left preconditioning and true-residual history.

    Orthogonalization is modified Gram-Schmidt with one reorthogonalization
    pass whenever the first sweep removes most of the vector (loss of
    orthogonality).  The recorded history is ||b - op x_k|| / ||b|| with x_k
    reformed every iteration, not the preconditioned quantity; ``probe``, if
    given, receives every iterate x_k.

    A zero right-hand side returns the zero solution immediately.  When the
    iteration cap is hit the report comes back with ``converged=False``.
    """
    matvec = _as_matvec(op)
    b = np.asarray(b)
    N = b.shape[0]
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return SolveReport(np.zeros_like(b), [0.0], 0, True)
    dtype = np.result_type(b.dtype, getattr(op, "dtype", float), float)
    r0 = M.solve(b) if M is not None else b
    dtype = np.result_type(dtype, r0.dtype)
    beta = np.linalg.norm(r0)
    cap = min(64, maxit + 1)
    V = np.zeros((cap, N), dtype=dtype)
    V[0] = r0 / beta
    H = np.zeros((maxit + 1, maxit), dtype=dtype)
    cs = np.zeros(maxit, dtype=dtype)
    sn = np.zeros(maxit, dtype=dtype)
    g = np.zeros(maxit + 1, dtype=dtype)
    g[0] = beta
    history = [1.0]
    pre_history = [1.0]
    x = np.zeros(N, dtype=dtype)
    converged = False
    iters = 0
    for j in range(maxit):
        if j + 1 >= V.shape[0]:
            V = np.vstack([V, np.zeros((min(2 * V.shape[0], maxit + 1) - V.shape[0], N), dtype=dtype)])
        w = matvec(V[j])
        if M is not None:
            w = M.solve(w)
        w = w.astype(dtype, copy=True)
        norm_in = np.linalg.norm(w)
        for i in range(j + 1):
            h = np.vdot(V[i], w)
            H[i, j] = h
            w -= h * V[i]
        if np.linalg.norm(w) < 0.5 * norm_in:  # MGS lost orthogonality; one more pass
            for i in range(j + 1):
                h = np.vdot(V[i], w)
                H[i, j] += h
                w -= h * V[i]
        hnew = np.linalg.norm(w)
        H[j + 1, j] = hnew
        if hnew > 0:
            V[j + 1] = w / hnew
        for i in range(j):
            a, bb = H[i, j], H[i + 1, j]
            H[i, j] = np.conj(cs[i]) * a + np.conj(sn[i]) * bb
            H[i + 1, j] = -sn[i] * a + cs[i] * bb
        a, bb = H[j, j], H[j + 1, j]
        r = np.sqrt(abs(a) ** 2 + abs(bb) ** 2)
        if r == 0.0:
            cs[j], sn[j] = 1.0, 0.0
        else:
            cs[j], sn[j] = a / r, bb / r
        H[j, j] = np.conj(cs[j]) * a + np.conj(sn[j]) * bb
        H[j + 1, j] = 0.0
        gj = g[j]
        g[j] = np.conj(cs[j]) * gj
        g[j + 1] = -sn[j] * gj
        y = scipy.linalg.solve_triangular(
            H[: j + 1, : j + 1], g[: j + 1], lower=False, check_finite=False
        )
        x = y @ V[: j + 1]
        relres = np.linalg.norm(b - matvec(x)) / bnorm
        history.append(float(relres))
        pre_history.append(float(abs(g[j + 1]) / beta))
        iters = j + 1
        if probe is not None:
            probe(x)
        if relres <= tol:
            converged = True
            break
        if hnew == 0.0:  # Krylov space exhausted: x is exact up to roundoff
            converged = relres <= tol
            break
    return SolveReport(x, history, iters, converged, pre_history)


def tridiag_solve(sub, diag, super_, rhs):
    """Thomas elimination for a scalar tridiagonal system (no pivoting)."""
    n = len(diag)
    dtype = np.result_type(
        np.asarray(diag).dtype, np.asarray(rhs).dtype, np.asarray(sub).dtype, float
    )
    d = np.array(diag, dtype=dtype)
    r = np.array(rhs, dtype=dtype)
    sup = np.asarray(super_)
    lo = np.asarray(sub)
    for i in range(1, n):
        if d[i - 1] == 0:
            raise ZeroPivot(i - 1)
        m = lo[i - 1] / d[i - 1]
        d[i] = d[i] - m * sup[i - 1]
        r[i] = r[i] - m * r[i - 1]
    if d[n - 1] == 0:
        raise ZeroPivot(n - 1)
    x = np.empty(n, dtype=dtype)
    x[n - 1] = r[n - 1] / d[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = (r[i] - sup[i] * x[i + 1]) / d[i]
    return x


def block_udl_solve(pencil, A, v):
    """Solve T(A) x = e_1 (x) v by backward Schur elimination (dense blocks).

    Returns the full block solution and the Schur complements Sigma_i, which
    equal b_i(A) + t_i(A) for continued-fraction pencils.  Intended for small
    dense A (oracle use).
    """
    poly = pencil.as_poly() if isinstance(pencil, TridiagPencil) else pencil
    A = np.asarray(A.todense() if sp.issparse(A) else A)
    m = A.shape[0]
    v = np.asarray(v)
    if v.shape != (m,):
        raise DimensionMismatch("right-hand side length must match A")
    n1 = poly.n_plus_1

    def blockmat(p):
        out = np.zeros_like(A, dtype=np.result_type(A.dtype, p.coef.dtype))
        eye = np.eye(m)
        Ak = eye
        for c in p.coef:
            out = out + c * Ak
            Ak = Ak @ A
        return out

    diag_blocks = [blockmat(poly.beta(i)) for i in range(n1)]
    sub_blocks = [blockmat(poly.alpha(i)) for i in range(1, n1)]
    sup_blocks = [blockmat(poly.gamma(i)) for i in range(1, n1)]

    sigmas = [None] * n1
    sigmas[n1 - 1] = diag_blocks[n1 - 1]
    for i in range(n1 - 2, -1, -1):
        try:
            tail = np.linalg.solve(sigmas[i + 1], sub_blocks[i])
        except np.linalg.LinAlgError as exc:
            raise SingularSchurComplement(i + 1) from exc
        sigmas[i] = diag_blocks[i] - sup_blocks[i] @ tail

    # U^{-1} (e_1 (x) v) = e_1 (x) v and D w = e_1 (x) Sigma_0^{-1} v,
    # then forward substitution with L.
    x = np.zeros((n1, m), dtype=np.result_type(A.dtype, v.dtype, sigmas[0].dtype))
    try:
        x[0] = np.linalg.solve(sigmas[0], v)
    except np.linalg.LinAlgError as exc:
        raise SingularSchurComplement(0) from exc
    for i in range(1, n1):
        rhs = -(sub_blocks[i - 1] @ x[i - 1])
        try:
            x[i] = np.linalg.solve(sigmas[i], rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSchurComplement(i) from exc
    return x.reshape(-1), sigmas


def split_matrix(A, split: str) -> sp.csr_matrix:
    """The easily invertible part of A: its diagonal (jacobi) or lower
    triangle including the diagonal (gauss_seidel)."""
    A = validate_csr(A)
    if split == "jacobi":
        return validate_csr(sp.diags(A.diagonal()))
    if split == "gauss_seidel":
        return validate_csr(sp.tril(A, 0))
    raise ValueError(f"unknown splitting {split!r}")


def splitting_step(pencil: TridiagPencil, A, split: str, x, b):
    """One block-splitting step x <- x + T(Atilde)^{-1} (b - T(A) x).

    The correction solve runs in the permuted (grid-outer) ordering, where
    T(Atilde) is block triangular with tridiagonal diagonal blocks
    T0 - a_ii T1: Jacobi solves the m blocks independently, Gauss-Seidel
    sweeps them in ascending grid order, feeding updated strips forward.
    """
    A = validate_csr(A)
    m = A.shape[0]
    n1 = pencil.n_plus_1
    op = CFOperator(pencil.as_poly(), A)
    r = b - op.dot(x)
    At = split_matrix(A, split)
    delta = _solve_split_system(pencil, At, r, m, n1)
    return x + delta


def _solve_split_system(pencil: TridiagPencil, At: sp.csr_matrix, r, m: int, n1: int):
    """Solve (T0 (x) I - T1 (x) At) delta = r for triangular At, strip by strip."""
    t0, t1 = pencil.t0, pencil.t1
    strips = r.reshape(n1, m).T.copy()  # strips[i] is the length-(n+1) slice at grid i
    diag_a = At.diagonal()
    out = np.zeros_like(strips)
    indptr, indices, data = At.indptr, At.indices, At.data
    strictly_lower = At.nnz > np.count_nonzero(diag_a)
    for i in range(m):
        rhs = strips[i]
        if strictly_lower:
            acc = np.zeros(n1, dtype=out.dtype)
            for p in range(indptr[i], indptr[i + 1]):
                jcol = indices[p]
                if jcol < i:
                    acc += data[p] * out[jcol]
            rhs = rhs + t1.matvec(acc)
        sub = t0.sub - diag_a[i] * t1.sub
        dia = t0.diag - diag_a[i] * t1.diag
        sup = t0.super - diag_a[i] * t1.super
        try:
            out[i] = tridiag_solve(sub, dia, sup, rhs)
        except ZeroPivot as exc:
            raise SingularTridiagonalBlock(i) from exc
    return out.T.reshape(-1)


def shifted_solver(
    A,
    expansion: PartialFractionExpansion,
    v,
    tol: float = 1e-12,
    maxit: int = 500,
    preconditioner: str = "none",
    probe=None,
):
    """Solve (A - tau_j I) x_j = v for every pole and combine
    y = -sum_j w_j x_j + sigma v.

    ``max_history[k]`` is the largest relative residual across all shifts
    after k iterations; converged shifts hold their final residual.  With
    ``preconditioner='ilu0'`` each shifted matrix gets its own zero-fill
    factorization.  ``probe(j, x)``, if given, sees every iterate of shift j.

    Returns (y, max_history, converged).
    """
    A = validate_csr(A)
    m = A.shape[0]
    v = np.asarray(v)
    complex_poles = bool(np.any(np.abs(expansion.poles.imag) > 0)) if len(expansion) else False
    dtype = complex if (complex_poles or np.iscomplexobj(v)) else float
    y = expansion.constant * v.astype(complex)
    histories = []
    converged_all = True
    eye = sp.eye(m, format="csr")
    for j, (tau, w) in enumerate(zip(expansion.poles, expansion.weights)):
        tau_cast = tau if dtype is complex else tau.real
        As = validate_csr(A - tau_cast * eye)
        if dtype is complex:
            As = As.astype(complex)
        M = ilu0(As) if preconditioner == "ilu0" else None
        shift_probe = (lambda xk, jj=j: probe(jj, xk)) if probe is not None else None
        rep = gmres(As, v.astype(dtype), M=M, tol=tol, maxit=maxit, probe=shift_probe)
        converged_all &= rep.converged
        histories.append(rep.residual_history)
        y = y - w * rep.solution
    if not histories:
        return _realify(y, v), [0.0], True
    depth = max(len(h) for h in histories)
    max_history = []
    for k in range(depth):
        max_history.append(max(h[min(k, len(h) - 1)] for h in histories))
    return _realify(y, v), max_history, converged_all


def _realify(y, v):
    """Drop a vanishing imaginary part when the input data was real."""
    if np.iscomplexobj(v):
        return y
    scale = np.linalg.norm(y)
    if scale == 0 or np.linalg.norm(y.imag) <= 1e-10 * scale:
        return y.real.copy()
    return y
