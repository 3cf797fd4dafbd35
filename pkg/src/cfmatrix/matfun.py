"""High-level engines for evaluating r(A)v.

Two routes to the same value: solve the single block-tridiagonal system
T(A) x = e_1 (x) v and read off the first block (the CF route), or expand
r into partial fractions and combine shifted solves (the PFE route).  The
module also hosts the inverse-square-root pencil built by shifting the
sqrt(1+z) family, an error oracle based on (A^2)^{-1/2} = A^{-1}, the
Sylvester-equation residual check, and the splitting-propagator spectrum
comparisons.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .confrac import ContinuedFraction, builder_exp, builder_sqrt1p, eval_backward
from .errors import DimensionMismatch, MultiplePoleDetected, NoConvergence
from .linalg import (
    CFOperator,
    dense_eigenvalues,
    dense_eigenvector,
    kron_permutation,
    power_iteration,
    validate_csr,
)
from .pencil import Tridiag, TridiagPencil, finite_poles, pencil_from_cfraction, pencil_from_contracted, pfe
from .solvers import Preconditioner, SolveReport, gmres, ilu0, shifted_solver, split_matrix, _solve_split_system


@dataclass(frozen=True)
class FunctionSpec:
    """Which rational family to use and at what degree.

    kind 'exp_neg' approximates exp(-A)v, 'inv_sqrt' approximates A^(-1/2)v,
    'custom_cf' takes the continued fraction from ``cf``.  ``form`` selects
    the plain C-fraction pencil or the contracted one (half the blocks for
    the same diagonal Pade degree).
    """

    kind: str
    degree: int
    form: str = "contracted"
    cf: ContinuedFraction | None = None

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if self.kind not in ("exp_neg", "inv_sqrt", "custom_cf"):
            raise ValueError(f"unknown function kind {self.kind!r}")
        if self.form not in ("plain", "contracted"):
            raise ValueError(f"unknown pencil form {self.form!r}")
        if self.kind == "custom_cf" and self.cf is None:
            raise ValueError("custom_cf needs a continued fraction")
        if self.kind == "inv_sqrt" and self.form != "contracted":
            raise ValueError("inv_sqrt is built on the contracted pencil")


def build_pencil(spec: FunctionSpec) -> TridiagPencil:
    """The tridiagonal pencil realizing the requested approximant."""
    if spec.kind == "exp_neg":
        if spec.form == "contracted":
            return pencil_from_contracted(builder_exp(2 * spec.degree))
        return pencil_from_cfraction(builder_exp(spec.degree))
    if spec.kind == "inv_sqrt":
        return invsqrt_pencil(spec.degree)
    cf = spec.cf
    if spec.form == "contracted":
        return pencil_from_contracted(cf)
    return pencil_from_cfraction(cf)


def scalar_value(spec: FunctionSpec, lam):
    """r(lam) = 1/g_n(lam) evaluated through the backward tail recursion."""
    if spec.kind == "exp_neg":
        if spec.form == "contracted":
            return 1.0 / eval_backward(builder_exp(2 * spec.degree), 2 * spec.degree, lam)
        return 1.0 / eval_backward(builder_exp(spec.degree), spec.degree, lam)
    if spec.kind == "inv_sqrt":
        n2 = 2 * spec.degree
        return 1.0 / eval_backward(builder_sqrt1p(n2), n2, lam - 1.0)
    cf = spec.cf
    n = len(cf) if spec.form == "plain" else 2 * (len(cf) // 2)
    return 1.0 / eval_backward(cf, n, lam)


def invsqrt_pencil(n: int) -> TridiagPencil:
    """Pencil encoding z^(-1/2): the contracted sqrt(1+z) pencil with the
    variable shifted by one, (T0 + T1) - z T1."""
    base = pencil_from_contracted(builder_sqrt1p(2 * n))
    return TridiagPencil(base.t0 + base.t1, base.t1)


@dataclass
class SolverConfig:
    """Knobs shared by the solving engines."""

    tol: float = 1e-12
    maxit: int = 500
    preconditioner: str = "ilu0"  # none | ilu0 (CF route)
    pfe_preconditioner: str = "none"  # none | ilu0 (per shifted system)
    ilu_ordering: str = "block"  # block (natural) | grid (permuted)


def _cf_preconditioner(T: sp.csr_matrix, n1: int, m: int, cfg: SolverConfig):
    if cfg.preconditioner == "none":
        return None
    if cfg.preconditioner != "ilu0":
        raise ValueError(f"unknown preconditioner {cfg.preconditioner!r}")
    if cfg.ilu_ordering == "block":
        return ilu0(T)
    perm = kron_permutation(n1, m)
    inner = ilu0(T[perm, :][:, perm])

    def solve(b):
        z = inner.solve(b[perm])
        out = np.empty_like(z)
        out[perm] = z
        return out

    return Preconditioner("ilu0", solve)


def cf_apply(spec, A, v, config: SolverConfig | None = None, probe=None):
    """r(A)v through one solve with the block CF-matrix.

    Returns (y, report): y is the first block of the solution of
    T(A) x = e_1 (x) v.  ``spec`` may be a FunctionSpec or a ready pencil.
    """
    cfg = config or SolverConfig()
    pencil = build_pencil(spec) if isinstance(spec, FunctionSpec) else spec
    A = validate_csr(A)
    m = A.shape[0]
    v = np.asarray(v)
    if v.shape != (m,):
        raise DimensionMismatch("v must match the dimension of A")
    op = CFOperator(pencil.as_poly(), A)
    rhs = np.zeros(op.shape[0], dtype=np.result_type(v.dtype, float))
    rhs[:m] = v
    M = None
    if cfg.preconditioner != "none":
        T = op.assemble()
        M = _cf_preconditioner(T, op.n_plus_1, m, cfg)
    report = gmres(op, rhs, M=M, tol=cfg.tol, maxit=cfg.maxit, probe=probe)
    return report.solution[:m].copy(), report


def pfe_apply(spec, A, v, config: SolverConfig | None = None, probe=None):
    """r(A)v through the partial fraction expansion and shifted solves.

    Returns (y, max_history, converged); max_history tracks the largest
    relative residual across all shifts per iteration.
    """
    cfg = config or SolverConfig()
    pencil = build_pencil(spec) if isinstance(spec, FunctionSpec) else spec
    expansion = pfe(pencil)
    return shifted_solver(
        A,
        expansion,
        v,
        tol=cfg.tol,
        maxit=cfg.maxit,
        preconditioner=cfg.pfe_preconditioner,
        probe=probe,
    )


def sylvester_form(x, n_plus_1: int, m: int) -> np.ndarray:
    """Reshape a stacked block vector into the matrix X with columns x_0...x_n."""
    x = np.asarray(x)
    if x.shape != (n_plus_1 * m,):
        raise DimensionMismatch(f"expected length {n_plus_1 * m}, got {x.shape}")
    return x.reshape(n_plus_1, m).T.copy()


def sylvester_residual(X, pencil: TridiagPencil, A, v) -> float:
    """Frobenius norm of X T0^T - A X T1^T - v e_1^T.

    The block system T(A) x = e_1 (x) v and this matrix equation are the same
    statement, so a converged CF solution makes the residual small.
    """
    A = validate_csr(A)
    T0 = pencil.t0.todense()
    T1 = pencil.t1.todense()
    R = X @ T0.T - A @ (X @ T1.T)
    R[:, 0] -= np.asarray(v)
    return float(np.linalg.norm(R, "fro"))


class _PropagatorOperator:
    """Matrix-free error propagator M = I - T(At)^{-1} T(A) of a splitting."""

    def __init__(self, pencil: TridiagPencil, A, split: str):
        self.pencil = pencil
        self.A = validate_csr(A)
        self.At = split_matrix(self.A, split)
        self.op = CFOperator(pencil.as_poly(), self.A)
        self.shape = self.op.shape
        self.dtype = np.result_type(self.op.dtype, float)
        self._m = self.A.shape[0]
        self._n1 = pencil.n_plus_1

    def dot(self, x):
        w = self.op.dot(x)
        return x - _solve_split_system(self.pencil, self.At, w, self._m, self._n1)


@dataclass
class SpectrumComparison:
    """Both sides of the splitting-propagator spectrum identity."""

    pole_radii: list
    radius_from_poles: float
    radius_dense: float | None
    radius_power: float | None
    spectra_max_distance: float | None
    n_infinite: int
    matched: bool


def _greedy_match_distance(a, b) -> float:
    """Largest pairing distance of two equal-size multisets under greedy
    nearest-neighbor matching (eigenvalue order is arbitrary)."""
    if len(a) != len(b):
        raise DimensionMismatch("multisets must have equal size")
    a = sorted(a, key=abs, reverse=True)
    pool = list(b)
    worst = 0.0
    for x in a:
        j = min(range(len(pool)), key=lambda k: abs(x - pool[k]))
        worst = max(worst, abs(x - pool[j]))
        pool.pop(j)
    return worst


def _rank_factors(E, rtol: float = 1e-12):
    """SVD rank factorization E = U S V^H truncated at the numerical rank."""
    U, s, Vh = np.linalg.svd(np.asarray(E))
    if len(s) == 0 or s[0] == 0.0:
        return U[:, :0], s[:0], Vh[:0]
    r = int(np.sum(s > rtol * s[0]))
    return U[:, :r], s[:r], Vh[:r]


def smoother_spectrum_check(
    pencil: TridiagPencil,
    A,
    split: str,
    dense_cap: int = 2048,
    power_maxit: int = 20000,
    power_tol: float = 1e-10,
) -> SpectrumComparison:
    """Compare spec(I - T(At)^{-1} T(A)) with the union over poles tau_i of
    spec(I - (At - tau_i I)^{-1}(A - tau_i I)), plus zeros for the infinite
    eigenvalues of the pencil.

    Both propagators are rank-deflated before the eigensolve: with
    E = A - At, the big propagator is T(At)^{-1} (T1 (x) E), so its nonzero
    eigenvalues are those of a small core matrix built from rank
    factorizations of T1 and E, and the (many, often defective) zero
    eigenvalues are accounted for exactly instead of as eigensolver noise.
    The propagator radius is additionally estimated by power iteration on the
    matrix-free operator; when (n+1) m fits under ``dense_cap`` the full
    spectra are compared as multisets.
    """
    A = validate_csr(A)
    m = A.shape[0]
    n1 = pencil.n_plus_1
    taus, n_inf = finite_poles(pencil)
    At = split_matrix(A, split)
    Ad = A.toarray()
    Atd = At.toarray()
    E = Ad - Atd
    U2, s2, V2h = _rank_factors(E)
    r2 = len(s2)
    eye = np.eye(m)
    pole_spectra = []
    pole_radii = []
    for tau in taus:
        # M(tau) = -(At - tau I)^{-1} E; nonzero spectrum from the r2 x r2 core
        if r2:
            W = np.linalg.solve(Atd - tau * eye, U2)
            core = -(V2h @ W) * s2[None, :]
            lam_nz = dense_eigenvalues(core, cap=dense_cap)
        else:
            lam_nz = np.array([], dtype=complex)
        lam = np.concatenate([lam_nz, np.zeros(m - r2, dtype=complex)])
        pole_spectra.append(lam)
        pole_radii.append(float(np.abs(lam).max()) if len(lam) else 0.0)
    radius_from_poles = max(pole_radii + ([0.0] if n_inf else []), default=0.0)

    radius_dense = None
    spectra_max_distance = None
    matched = False
    if n1 * m <= dense_cap:
        # Mbig = T(At)^{-1} (T1 (x) E); deflate through the Kronecker factors
        T1d = pencil.t1.todense()
        U1, s1, V1h = _rank_factors(T1d)
        r1 = len(s1)
        Tt = CFOperator(pencil.as_poly(), At).assemble().toarray()
        if r1 and r2:
            Uk = np.kron(U1, U2)
            Vkh = np.kron(V1h, V2h)
            sk = np.kron(s1, s2)
            W = np.linalg.solve(Tt, Uk)
            core = (Vkh @ W) * sk[None, :]
            lam_nz = dense_eigenvalues(core, cap=dense_cap)
        else:
            lam_nz = np.array([], dtype=complex)
        lam_big = np.concatenate([lam_nz, np.zeros(n1 * m - len(lam_nz), dtype=complex)])
        radius_dense = float(np.abs(lam_big).max()) if len(lam_big) else 0.0
        union = (
            np.concatenate(pole_spectra + [np.zeros(n_inf * m, dtype=complex)])
            if (pole_spectra or n_inf)
            else np.array([], dtype=complex)
        )
        spectra_max_distance = _greedy_match_distance(lam_big, union)
        matched = True

    prop = _PropagatorOperator(pencil, A, split)
    try:
        radius_power, _ = power_iteration(prop, maxit=power_maxit, tol=power_tol)
    except NoConvergence as err:
        radius_power = err.estimate
    return SpectrumComparison(
        pole_radii=pole_radii,
        radius_from_poles=radius_from_poles,
        radius_dense=radius_dense,
        radius_power=radius_power,
        spectra_max_distance=spectra_max_distance,
        n_infinite=n_inf,
        matched=matched,
    )


def eig_transport_check(pencil: TridiagPencil, A, A_tilde, pole_index: int) -> float:
    """Transport eigenvectors of one shifted propagator up to the block level.

    For each eigenpair (lambda, w) of M(tau_i) the vector v (x) w, with v a
    pencil eigenvector at tau_i, is an eigenvector of the block propagator;
    returns the worst relative residual over all eigenpairs.  Requires the
    simple-pole (diagonal Weierstrass) structure.
    """
    A = np.asarray(A.todense() if sp.issparse(A) else A)
    At = np.asarray(A_tilde.todense() if sp.issparse(A_tilde) else A_tilde)
    m = A.shape[0]
    taus, _ = finite_poles(pencil)
    scale = np.abs(taus).max()
    for i in range(len(taus)):
        for j in range(i + 1, len(taus)):
            if abs(taus[i] - taus[j]) < 1e-8 * max(scale, 1e-300):
                raise MultiplePoleDetected("transport needs pairwise distinct poles")
    tau = taus[pole_index]
    eye = np.eye(m)
    Mt = eye - np.linalg.solve(At - tau * eye, A - tau * eye)
    lams = dense_eigenvalues(Mt)
    # pencil eigenvector at tau: null vector of T0 - tau T1
    P = pencil.t0.todense().astype(complex) - tau * pencil.t1.todense()
    _, _, vh = np.linalg.svd(P)
    v = vh[-1].conj()
    Tbig = CFOperator(pencil.as_poly(), sp.csr_matrix(A)).assemble().toarray()
    Ttbig = CFOperator(pencil.as_poly(), sp.csr_matrix(At)).assemble().toarray()
    Mbig = np.eye(Tbig.shape[0]) - np.linalg.solve(Ttbig, Tbig)
    worst = 0.0
    for lam in lams:
        w = dense_eigenvector(Mt, lam)
        vw = np.kron(v, w)
        res = np.linalg.norm(Mbig @ vw - lam * vw) / np.linalg.norm(vw)
        worst = max(worst, float(res))
    return worst


@dataclass
class BenchResult:
    """Per-method histories of one benchmark run on shared A, v, tol."""

    kind: str
    histories: dict = field(default_factory=dict)
    iterations: dict = field(default_factory=dict)
    converged: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


def bench_residuals(spec: FunctionSpec, A, v, cfg: SolverConfig, methods=("cf", "cf_ilu0", "pfe")) -> BenchResult:
    """Relative-residual benchmark: CF-matrix without and with ILU(0), and the
    PFE max-residual curve, all at the same tolerance."""
    out = BenchResult(kind=spec.kind)
    pencil = build_pencil(spec)
    for method in methods:
        t0 = time.perf_counter()
        if method == "pfe":
            _, hist, ok = pfe_apply(pencil, A, v, cfg)
            iters = len(hist) - 1
        else:
            sub_cfg = SolverConfig(
                tol=cfg.tol,
                maxit=cfg.maxit,
                preconditioner="ilu0" if method == "cf_ilu0" else "none",
                ilu_ordering=cfg.ilu_ordering,
            )
            _, rep = cf_apply(pencil, A, v, sub_cfg)
            hist, iters, ok = rep.residual_history, rep.iterations, rep.converged
        out.histories[method] = hist
        out.iterations[method] = iters
        out.converged[method] = ok
        out.timings[method] = time.perf_counter() - t0
    out.meta = {
        "kind": spec.kind,
        "degree": spec.degree,
        "tol": cfg.tol,
        "maxit": cfg.maxit,
        "m": validate_csr(A).shape[0],
        "block_count": pencil.n_plus_1,
        "pfe_arithmetic": "complex" if spec.kind == "exp_neg" else "real",
        "cf_arithmetic": "real",
    }
    return out


def invsqrt_error_oracle(
    A,
    v,
    n: int,
    cfg: SolverConfig | None = None,
    methods=("cf", "cf_ilu0", "pfe"),
    truth_tol: float = 1e-14,
) -> BenchResult:
    """Per-iteration error series for (A^2)^{-1/2} v against the solution of
    A x = v, which is the exact value of the inverse square root of A^2
    applied to v.

    Each method's iterates are probed; the reported series is
    ||y_k - x*|| / ||x*|| with y_k the first block (CF routes) or the running
    partial-fraction combination (PFE route).
    """
    cfg = cfg or SolverConfig()
    A = validate_csr(A)
    m = A.shape[0]
    v = np.asarray(v)
    B = validate_csr(A @ A)
    pencil = invsqrt_pencil(n)
    truth_rep = gmres(A, v, M=ilu0(A), tol=truth_tol, maxit=max(2 * cfg.maxit, 200))
    xstar = truth_rep.solution
    xnorm = np.linalg.norm(xstar)
    out = BenchResult(kind="invsqrt_error")
    out.meta = {
        "kind": "invsqrt_error",
        "degree": n,
        "tol": cfg.tol,
        "maxit": cfg.maxit,
        "m": m,
        "block_count": pencil.n_plus_1,
        "truth_residual": truth_rep.residual_history[-1],
    }
    for method in methods:
        t0 = time.perf_counter()
        if method == "pfe":
            errors, ok, iters = _pfe_error_series(pencil, B, v, xstar, cfg)
        else:
            errors = []
            sub_cfg = SolverConfig(
                tol=cfg.tol,
                maxit=cfg.maxit,
                preconditioner="ilu0" if method == "cf_ilu0" else "none",
                ilu_ordering=cfg.ilu_ordering,
            )
            _, rep = cf_apply(
                pencil, B, v, sub_cfg, probe=lambda xk: errors.append(
                    float(np.linalg.norm(xk[:m] - xstar) / xnorm)
                ),
            )
            ok, iters = rep.converged, rep.iterations
        out.histories[method] = [1.0] + errors  # x_0 = 0 has relative error 1
        out.iterations[method] = iters
        out.converged[method] = ok
        out.timings[method] = time.perf_counter() - t0
    return out


def _pfe_error_series(pencil, B, v, xstar, cfg: SolverConfig):
    """Error of the running PFE combination, reconstructed from per-shift
    iterate snapshots (each shift's own final iterate is its reference)."""
    expansion = pfe(pencil)
    snapshots = {}

    def probe(j, xk):
        snapshots.setdefault(j, []).append(xk.copy())

    y, hist, ok = shifted_solver(
        B, expansion, v, tol=cfg.tol, maxit=cfg.maxit,
        preconditioner=cfg.pfe_preconditioner, probe=probe,
    )
    depth = max((len(s) for s in snapshots.values()), default=0)
    base = y - xstar
    xnorm = np.linalg.norm(xstar)
    D = np.zeros((depth, len(xstar)), dtype=complex)
    for j, snaps in snapshots.items():
        w = expansion.weights[j]
        final = snaps[-1]
        for k, xk in enumerate(snaps[:-1]):
            D[k] += w * (xk - final)
        # iterations past this shift's convergence contribute nothing
    errors = [float(np.linalg.norm(base - D[k]) / xnorm) for k in range(depth)]
    return errors, ok, len(hist) - 1
