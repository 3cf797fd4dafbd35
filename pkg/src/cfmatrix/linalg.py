"""Sparse and small-dense kernels.

CSR matrix helpers and generators, the Kronecker-structured block operator
T(A) = sum_j T_j (x) A^j applied matrix-free or assembled to sparse storage,
a small dense eigensolver front end, power iteration, the block/grid
Kronecker permutation, and Matrix Market / plain-text vector I/O.
"""

from __future__ import annotations

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import DimensionMismatch, NoConvergence


def validate_csr(A) -> sp.csr_matrix:
    """Canonical square CSR: sorted indices, summed duplicates, no stored zeros."""
    A = sp.csr_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got {A.shape}")
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    return A


def laplace2d(k: int) -> sp.csr_matrix:
    """Discrete 2D Laplacian A0 (x) I + I (x) A0 with A0 = tridiag(-1, 2, -1) of size k."""
    if k < 1:
        raise ValueError("grid size must be >= 1")
    ones = np.ones(k)
    A0 = sp.diags([-ones[:-1], 2 * ones, -ones[:-1]], [-1, 0, 1])
    eye = sp.eye(k)
    return validate_csr(sp.kron(A0, eye) + sp.kron(eye, A0))


def random_mmatrix(m: int, density: float, seed: int, shift: float = 0.01) -> sp.csr_matrix:
    """Random sparse M-matrix A = B + (rho(B) + shift) I.

    B is a Z-matrix built from a seeded uniform sparse draw: values in (0, 1)
    at uniformly chosen off-diagonal positions, negated, zero diagonal.  The
    spectral radius rho(B) comes from power iteration with a deterministic
    start vector.
    """
    if not 0 < density <= 1:
        raise ValueError("density must be in (0, 1]")
    rng = np.random.default_rng(seed)
    nnz_target = int(round(density * m * m))
    rows = np.empty(0, dtype=np.int64)
    cols = np.empty(0, dtype=np.int64)
    while len(rows) < nnz_target:
        need = nnz_target - len(rows)
        r = rng.integers(0, m, size=int(1.2 * need) + 8)
        c = rng.integers(0, m, size=len(r))
        keep = r != c
        r, c = r[keep], c[keep]
        flat = np.unique(np.concatenate([rows * m + cols, r * m + c]))
        rows, cols = flat // m, flat % m
    order = rng.permutation(len(rows))[:nnz_target]
    rows, cols = rows[order], cols[order]
    vals = rng.uniform(size=nnz_target)
    B = validate_csr(sp.coo_matrix((-vals, (rows, cols)), shape=(m, m)))
    if B.nnz == 0:
        rho = 0.0
    else:
        rho, _ = power_iteration(B, maxit=5000, tol=1e-8)
    return validate_csr(B + (rho + shift) * sp.eye(m))


class CFOperator:
    """Block operator sum_j T_j (x) A^j acting on stacked block vectors.

    ``terms`` gives the small (n+1) x (n+1) matrices T_0 ... T_ell (objects
    with ``todense()`` are accepted); A is sparse and its powers are applied
    by repeated multiplication, never formed, except in :meth:`assemble`.
    """

    def __init__(self, terms, A):
        if hasattr(terms, "terms"):  # a PolyTridiag
            terms = terms.terms
        self.terms = [np.asarray(t.todense() if hasattr(t, "todense") else t) for t in terms]
        n1 = self.terms[0].shape[0]
        for t in self.terms:
            if t.shape != (n1, n1):
                raise DimensionMismatch("all terms must share the same dimension")
        self.A = validate_csr(A)
        self.m = self.A.shape[0]
        self.n_plus_1 = n1
        self.shape = (n1 * self.m, n1 * self.m)
        self.dtype = np.result_type(self.A.dtype, *(t.dtype for t in self.terms))

    @property
    def ell(self) -> int:
        return len(self.terms) - 1

    def dot(self, x):
        x = np.asarray(x)
        if x.shape != (self.shape[0],):
            raise DimensionMismatch(f"expected vector of length {self.shape[0]}")
        X = x.reshape(self.n_plus_1, self.m)
        Y = self.terms[0] @ X
        W = X
        for j in range(1, len(self.terms)):
            W = self.A.dot(W.T).T
            Y = Y + self.terms[j] @ W
        return np.asarray(Y).reshape(-1)

    __matmul__ = dot

    def assemble(self, max_power: int = 2) -> sp.csr_matrix:
        """Explicit CSR of sum_j T_j (x) A^j (A^0 = I); refuses ell > max_power."""
        if self.ell > max_power:
            raise ValueError(f"assembly limited to ell <= {max_power}, got {self.ell}")
        out = sp.kron(sp.csr_matrix(self.terms[0]), sp.eye(self.m), format="csr")
        Aj = sp.eye(self.m, format="csr")
        for j in range(1, len(self.terms)):
            Aj = validate_csr(Aj @ self.A)
            out = out + sp.kron(sp.csr_matrix(self.terms[j]), Aj, format="csr")
        return validate_csr(out)


def dense_eigenvalues(M, cap: int = 512) -> np.ndarray:
    """All eigenvalues of a small dense matrix (LAPACK: balancing, Hessenberg,
    shifted QR)."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"need a square matrix, got {M.shape}")
    if M.shape[0] > cap:
        raise ValueError(f"dimension {M.shape[0]} exceeds cap {cap}")
    try:
        return np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"QR iteration did not converge: {exc}") from exc


def dense_eigenvector(M, lam, maxit: int = 50, tol: float = 1e-8, seed: int = 0) -> np.ndarray:
    """Unit eigenvector for an approximate eigenvalue, by inverse iteration.

    The shifted matrix is regularized by a small multiple of machine epsilon
    when it is numerically singular (the usual case, since lam is close to an
    exact eigenvalue).
    """
    M = np.asarray(M)
    n = M.shape[0]
    norm_m = max(np.linalg.norm(M, ord=np.inf), 1e-300)
    dtype = np.result_type(M.dtype, np.asarray(lam).dtype, float)
    B = M.astype(dtype) - lam * np.eye(n, dtype=dtype)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n).astype(dtype)
    if np.iscomplexobj(B):
        v = v + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    eps_shift = 0.0
    for _ in range(maxit):
        try:
            w = np.linalg.solve(B + eps_shift * np.eye(n, dtype=dtype), v)
        except np.linalg.LinAlgError:
            eps_shift = (eps_shift or np.finfo(float).eps * norm_m) * 10
            continue
        if not np.all(np.isfinite(w)):
            eps_shift = (eps_shift or np.finfo(float).eps * norm_m) * 10
            continue
        v = w / np.linalg.norm(w)
        if np.linalg.norm(M @ v - lam * v) <= tol * norm_m:
            return v
    raise NoConvergence(f"inverse iteration stalled for eigenvalue {lam}")


def power_iteration(op, maxit: int = 10000, tol: float = 1e-8, seed: int = 0):
    """Dominant eigenvalue modulus and an accompanying Ritz vector.

    Runs subspace (block power) iteration with two vectors: real matrices
    routinely carry modulus-tied eigenvalue pairs (a +-rho pair or a complex
    conjugate pair), on which a single power vector stagnates, while a
    two-dimensional Ritz projection resolves the pair.  Converged when
    successive dominant Ritz moduli agree to a relative tolerance.
    Deterministic for a fixed seed.
    """
    n = op.shape[0]
    k = min(2, n)
    rng = np.random.default_rng(seed)
    Q = rng.uniform(-1, 1, size=(n, k))
    if np.issubdtype(getattr(op, "dtype", np.float64), np.complexfloating):
        Q = Q + 1j * rng.uniform(-1, 1, size=(n, k))
    Q, _ = np.linalg.qr(Q)
    est = None
    for _ in range(maxit):
        W = np.column_stack([op.dot(np.ascontiguousarray(Q[:, j])) for j in range(k)])
        if np.linalg.norm(W) == 0.0:
            return 0.0, Q[:, 0]
        B = Q.conj().T @ W
        ritz, S = np.linalg.eig(B)
        top = int(np.argmax(np.abs(ritz)))
        new_est = float(np.abs(ritz[top]))
        if est is not None and abs(new_est - est) <= tol * max(new_est, 1e-300):
            return new_est, Q @ S[:, top]
        est = new_est
        Q, _ = np.linalg.qr(W)
    raise NoConvergence(f"power iteration did not converge in {maxit} steps", estimate=est)


def kron_permutation(n1: int, m: int) -> np.ndarray:
    """Index map P with (P x)[(k, i)] = x[(i, k)], so P (B (x) C) P^T = C (x) B
    for B of dimension n1 and C of dimension m.  Apply as ``x[perm]``."""
    if n1 < 1 or m < 1:
        raise ValueError("block count and block size must be positive")
    return np.arange(n1 * m).reshape(n1, m).T.ravel()


def permute_spmatrix(M, perm: np.ndarray):
    """P M P^T for a permutation given as an index map (sparse or dense M)."""
    if sp.issparse(M):
        return validate_csr(M.tocsr()[perm, :][:, perm])
    M = np.asarray(M)
    return M[np.ix_(perm, perm)]


def companion_matrix(coef) -> np.ndarray:
    """Companion matrix of a polynomial with ascending coefficients.

    The variable is rescaled by the root-radius estimate |c0/cd|^(1/d) before
    building the matrix, which improves the conditioning of the eigenvalue
    computation; returned alongside is the scale to undo the substitution.
    """
    coef = np.asarray(coef, dtype=float)
    d = len(coef) - 1
    if d < 1:
        raise ValueError("polynomial must have degree >= 1")
    if coef[-1] == 0:
        raise ValueError("leading coefficient must be nonzero")
    scale = abs(coef[0] / coef[-1]) ** (1.0 / d) if coef[0] != 0 else 1.0
    cs = coef * scale ** np.arange(d + 1)
    cs = cs / cs[-1]
    C = np.zeros((d, d))
    C[1:, :-1] = np.eye(d - 1)
    C[:, -1] = -cs[:-1]
    return C, scale


def polynomial_roots(coef, cap: int = 512) -> np.ndarray:
    """Roots of an ascending-coefficient polynomial as eigenvalues of the
    scaled companion matrix."""
    coef = np.asarray(coef, dtype=float)
    if len(coef) == 1:
        return np.array([], dtype=complex)
    C, scale = companion_matrix(coef)
    return dense_eigenvalues(C, cap=cap) * scale


def write_matrix_market(path, A, symmetry: str | None = None) -> None:
    """Matrix Market coordinate output for a sparse matrix."""
    kwargs = {"symmetry": symmetry} if symmetry else {}
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), **kwargs)


def read_matrix_market(path) -> sp.csr_matrix:
    """Matrix Market input (general or symmetric, real or complex) as CSR."""
    return validate_csr(scipy.io.mmread(str(path)))


def write_vector(path, v) -> None:
    """One value per line, shortest round-trip decimal (complex as a+bj)."""
    v = np.asarray(v)
    with open(path, "w") as fh:
        for x in v:
            if np.iscomplexobj(v):
                fh.write(f"{repr(float(x.real))} {repr(float(x.imag))}\n")
            else:
                fh.write(repr(float(x)) + "\n")


def read_vector(path) -> np.ndarray:
    """Parse the format written by :func:`write_vector`."""
    rows = []
    complex_any = False
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if len(parts) == 2:
                rows.append(complex(float(parts[0]), float(parts[1])))
                complex_any = True
            else:
                rows.append(float(parts[0]))
    return np.array(rows, dtype=complex if complex_any else float)
