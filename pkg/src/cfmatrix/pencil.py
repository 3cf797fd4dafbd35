"""Tridiagonal pencils T(z) = T0 - z*T1 and their polynomial generalization.

A pencil built from a continued fraction satisfies, entrywise,
beta_i(z) = b_i(z) on the diagonal and -alpha_i(z) gamma_i(z) = c_i(z) across
the off-diagonal products; then (T(z)^{-1})_{1,1} = 1/g_n(z).  The finite
generalized eigenvalues of the pencil are the poles of g_n(z)^{-1}, read off
as the roots of the determinant polynomial det T(z), and for simple poles the
partial fraction expansion of g_n^{-1} follows from residues.

Determinant polynomials are accumulated exactly: matrix entries are binary
floating-point numbers, hence exact rationals, and the minors recursion runs
in Fraction arithmetic.  This pins down the polynomial degree (and with it
the number of infinite eigenvalues) without any trimming heuristics.  Roots
start from the eigenvalues of the scaled companion matrix and are then
polished by simultaneous Newton (Aberth) steps in extended precision, since
residue weights of Pade-type pencils grow so fast that double-precision
polynomial arithmetic cannot deliver them accurately.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import mpmath as mp
import numpy as np
import scipy.linalg

from .confrac import ContinuedFraction, Polynomial
from .errors import (
    DimensionMismatch,
    IrregularPencil,
    LengthTooShort,
    MultiplePoleDetected,
    NotACFraction,
    ShapeViolation,
    SingularAtZ,
)
from .linalg import companion_matrix, dense_eigenvalues


class Tridiag:
    """A single tridiagonal matrix stored as its three diagonals."""

    __slots__ = ("sub", "diag", "super")

    def __init__(self, sub, diag, super_):
        self.sub = np.atleast_1d(np.asarray(sub, dtype=None))
        self.diag = np.atleast_1d(np.asarray(diag))
        self.super = np.atleast_1d(np.asarray(super_))
        n1 = len(self.diag)
        if n1 == 1:
            self.sub = self.sub[:0]
            self.super = self.super[:0]
        if len(self.sub) != n1 - 1 or len(self.super) != n1 - 1:
            raise DimensionMismatch("off-diagonals must have length n")

    @classmethod
    def zeros(cls, n_plus_1, dtype=float):
        return cls(
            np.zeros(max(n_plus_1 - 1, 0), dtype),
            np.zeros(n_plus_1, dtype),
            np.zeros(max(n_plus_1 - 1, 0), dtype),
        )

    @classmethod
    def identity(cls, n_plus_1):
        t = cls.zeros(n_plus_1)
        return cls(t.sub, np.ones(n_plus_1), t.super)

    @classmethod
    def from_dense(cls, M):
        M = np.asarray(M)
        return cls(np.diag(M, -1), np.diag(M), np.diag(M, 1))

    @property
    def n_plus_1(self) -> int:
        return len(self.diag)

    def todense(self) -> np.ndarray:
        n1 = self.n_plus_1
        dtype = np.result_type(self.sub.dtype, self.diag.dtype, self.super.dtype)
        M = np.zeros((n1, n1), dtype=dtype)
        M[np.arange(n1), np.arange(n1)] = self.diag
        if n1 > 1:
            M[np.arange(1, n1), np.arange(n1 - 1)] = self.sub
            M[np.arange(n1 - 1), np.arange(1, n1)] = self.super
        return M

    def matvec(self, x):
        y = self.diag * x
        if self.n_plus_1 > 1:
            y[:-1] = y[:-1] + self.super * x[1:]
            y[1:] = y[1:] + self.sub * x[:-1]
        return y

    def __add__(self, other):
        return Tridiag(self.sub + other.sub, self.diag + other.diag, self.super + other.super)

    def __sub__(self, other):
        return Tridiag(self.sub - other.sub, self.diag - other.diag, self.super - other.super)

    def __neg__(self):
        return Tridiag(-self.sub, -self.diag, -self.super)

    def __rmul__(self, scalar):
        return Tridiag(scalar * self.sub, scalar * self.diag, scalar * self.super)

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.sub, self.super))

    def solve(self, rhs):
        """Pivoted banded solve of (this matrix) x = rhs."""
        n1 = self.n_plus_1
        dtype = np.result_type(self.diag.dtype, self.sub.dtype, np.asarray(rhs).dtype)
        if n1 == 1:
            return np.asarray(rhs, dtype=dtype) / self.diag[0]
        ab = np.zeros((3, n1), dtype=dtype)
        ab[0, 1:] = self.super
        ab[1, :] = self.diag
        ab[2, :-1] = self.sub
        return scipy.linalg.solve_banded((1, 1), ab, rhs, check_finite=False)


class PolyTridiag:
    """Polynomial family T(z) = sum_j terms[j] * z^j of tridiagonal matrices."""

    __slots__ = ("terms",)

    def __init__(self, terms):
        terms = tuple(terms)
        if not terms:
            raise ValueError("need at least one term")
        n1 = terms[0].n_plus_1
        if any(t.n_plus_1 != n1 for t in terms):
            raise DimensionMismatch("all terms must share the dimension")
        self.terms = terms

    @property
    def n_plus_1(self) -> int:
        return self.terms[0].n_plus_1

    @property
    def ell(self) -> int:
        return len(self.terms) - 1

    def beta(self, i: int) -> Polynomial:
        """Diagonal entry i as a polynomial in z."""
        return Polynomial([t.diag[i] for t in self.terms])

    def alpha(self, i: int) -> Polynomial:
        """Subdiagonal entry (i, i-1) as a polynomial in z."""
        return Polynomial([t.sub[i - 1] for t in self.terms])

    def gamma(self, i: int) -> Polynomial:
        """Superdiagonal entry (i-1, i) as a polynomial in z."""
        return Polynomial([t.super[i - 1] for t in self.terms])


class TridiagPencil:
    """Linear pencil T(z) = T0 - z * T1 of (n+1) x (n+1) tridiagonal matrices."""

    __slots__ = ("t0", "t1", "_det_cache")

    def __init__(self, t0: Tridiag, t1: Tridiag):
        if t0.n_plus_1 != t1.n_plus_1:
            raise DimensionMismatch("T0 and T1 must share the dimension")
        self.t0 = t0
        self.t1 = t1
        self._det_cache = None

    @property
    def n_plus_1(self) -> int:
        return self.t0.n_plus_1

    def as_poly(self) -> PolyTridiag:
        return PolyTridiag((self.t0, -self.t1))

    @property
    def regular(self) -> bool:
        """True when det T(z) does not vanish identically."""
        p, _ = self.determinant_polynomials()
        return any(c != 0 for c in p)

    def determinant_polynomials(self):
        """Exact coefficient lists (Fractions, ascending) of p(z) = det T(z)
        and of the first-row-first-column cofactor q(z), trimmed exactly."""
        if self._det_cache is None:
            self._det_cache = _det_polys_exact(self)
        return self._det_cache


def _as_poly(p) -> PolyTridiag:
    if isinstance(p, TridiagPencil):
        return p.as_poly()
    if isinstance(p, PolyTridiag):
        return p
    raise TypeError(f"expected a pencil, got {type(p)!r}")


def eval_pencil(p, z) -> Tridiag:
    """Elementwise polynomial evaluation of the three diagonals at z."""
    poly = _as_poly(p)
    dtype = np.result_type(np.asarray(z).dtype, *(t.diag.dtype for t in poly.terms))
    sub = np.zeros(poly.n_plus_1 - 1, dtype=dtype)
    diag = np.zeros(poly.n_plus_1, dtype=dtype)
    sup = np.zeros(poly.n_plus_1 - 1, dtype=dtype)
    for t in poly.terms[::-1]:
        sub = sub * z + t.sub
        diag = diag * z + t.diag
        sup = sup * z + t.super
    return Tridiag(sub, diag, sup)


def minors(p, z) -> list:
    """Leading principal minors [d_{-1}=1, d_0, ..., d_n] of T(z) by the
    three-term recursion; the last entry is det T(z)."""
    T = eval_pencil(_as_poly(p), z)
    out = [1.0, T.diag[0]]
    for i in range(1, T.n_plus_1):
        out.append(T.diag[i] * out[-1] - T.sub[i - 1] * T.super[i - 1] * out[-2])
    return out


def entry11_inverse(p, z):
    """(T(z)^{-1})_{1,1} = q(z)/p(z) = 1/g_n(z), by one tridiagonal solve with e_1.

    Raises SingularAtZ when the determinant d_n(z) is zero (the approximant
    vanishes there and the entry is the point at infinity).
    """
    poly = _as_poly(p)
    d = minors(poly, z)
    if d[-1] == 0:
        raise SingularAtZ(z)
    T = eval_pencil(poly, z)
    e1 = np.zeros(T.n_plus_1, dtype=np.result_type(T.diag.dtype, float))
    e1[0] = 1.0
    try:
        return T.solve(e1)[0]
    except scipy.linalg.LinAlgError as exc:
        raise SingularAtZ(z, f"factorization broke down at z = {z}") from exc


# ---------------------------------------------------------------------------
# constructions from continued fractions


def pencil_from_cfraction(cf: ContinuedFraction) -> TridiagPencil:
    """Pencil of a regular C-fraction: T0 = diag(b0, 1, ..., 1) plus a
    superdiagonal of ones, T1 with c_1 ... c_n on the subdiagonal."""
    cs = cf.cfraction_coefficients()  # raises NotACFraction
    n = len(cs)
    t0 = Tridiag(np.zeros(n), np.r_[cf.b[0].coef[0], np.ones(n)], np.ones(n))
    t1 = Tridiag(cs, np.zeros(n + 1), np.zeros(n))
    return TridiagPencil(t0, t1)


def pencil_from_contracted(cf: ContinuedFraction) -> TridiagPencil:
    """Pencil of the contracted C-fraction, built directly from c_1 ... c_{2n}
    so that no z^2 terms appear; level k of the result encodes g_{2k}."""
    cs = cf.cfraction_coefficients()
    if len(cs) < 2:
        raise LengthTooShort("need at least c_1, c_2 to contract")
    n = len(cs) // 2
    c = np.concatenate([[0.0], cs])  # 1-based
    t0 = Tridiag(
        np.zeros(n), np.r_[cf.b[0].coef[0], np.ones(n)], np.r_[-1.0, np.zeros(n - 1)]
    )
    sub = np.array([c[2 * i - 1] for i in range(1, n + 1)])
    diag = np.zeros(n + 1)
    if n >= 1:
        diag[1] = c[2]
    for i in range(2, n + 1):
        diag[i] = c[2 * i - 1] + c[2 * i]
    sup = np.zeros(n)
    for i in range(1, n):
        sup[i] = c[2 * i]
    return TridiagPencil(t0, Tridiag(-sub, -diag, -sup))


def pencil_from_longdiv(cf: ContinuedFraction, symmetric: bool = False) -> TridiagPencil:
    """Pencil of a long-division continued fraction (all c_i == 1, partial
    denominators b_i(z) = b_i0 - b_i1 * z): T0 carries the constant parts with
    -1/+1 off-diagonals, T1 = diag(b_i1).  With ``symmetric`` both matrices
    are symmetrized by unit diagonal sign scalings, which leaves the (1,1)
    entry of the inverse unchanged."""
    n = len(cf)
    for ci in cf.c:
        if ci != Polynomial([1.0]):
            raise ShapeViolation("all partial numerators must be 1")
    b0 = np.zeros(n + 1)
    b1 = np.zeros(n + 1)
    for i, bi in enumerate(cf.b):
        if bi.degree > 1:
            raise ShapeViolation(f"partial denominator {i} has degree {bi.degree} > 1")
        b0[i] = bi.coef[0]
        b1[i] = -bi.coef[1] if bi.degree >= 1 else 0.0
    t0 = Tridiag(np.ones(n), b0, -np.ones(n))
    t1 = Tridiag(np.zeros(n), b1, np.zeros(n))
    if symmetric:
        dl = np.array([(-1.0) ** (i // 2) for i in range(n + 1)])
        dr = np.array([(-1.0) ** ((i + 1) // 2) for i in range(n + 1)])
        t0 = _scale_two_sided(t0, dl, dr)
        t1 = _scale_two_sided(t1, dl, dr)
    return TridiagPencil(t0, t1)


def _scale_two_sided(t: Tridiag, dl, dr) -> Tridiag:
    return Tridiag(dl[1:] * t.sub * dr[:-1], dl * t.diag * dr, dl[:-1] * t.super * dr[1:])


def scale_pencil(pencil: TridiagPencil, d) -> TridiagPencil:
    """Congruence D T^{(j)} D with D = diag(1, d_1, ..., d_n); the (1,1) entry
    of the inverse, and hence all values 1/g_n, are unchanged."""
    from .errors import InvalidScaling

    d = np.asarray(d, dtype=float)
    if len(d) != pencil.n_plus_1:
        raise InvalidScaling(f"need {pencil.n_plus_1} factors")
    if d[0] != 1.0 or np.any(d == 0):
        raise InvalidScaling("need d[0] == 1 and all factors nonzero")
    return TridiagPencil(_scale_two_sided(pencil.t0, d, d), _scale_two_sided(pencil.t1, d, d))


# ---------------------------------------------------------------------------
# determinant polynomials, poles, partial fractions


def _exact_entries(pencil: TridiagPencil):
    """Pencil entries as (constant, linear) Fraction pairs; floats are exact."""
    def pair(a, b):
        return (Fraction(float(a)), Fraction(-float(b)))

    t0, t1 = pencil.t0, pencil.t1
    diag = [pair(t0.diag[i], t1.diag[i]) for i in range(pencil.n_plus_1)]
    sub = [pair(t0.sub[i], t1.sub[i]) for i in range(pencil.n_plus_1 - 1)]
    sup = [pair(t0.super[i], t1.super[i]) for i in range(pencil.n_plus_1 - 1)]
    return diag, sub, sup


def _conv(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _padd(a, b):
    if len(a) < len(b):
        a, b = b, a
    out = list(a)
    for i, y in enumerate(b):
        out[i] += y
    return out


def _trim_exact(c):
    while len(c) > 1 and c[-1] == 0:
        c = c[:-1]
    return c


def _det_polys_exact(pencil: TridiagPencil):
    """det T(z) and its (1,1) cofactor as exact Fraction coefficient lists."""
    diag, sub, sup = _exact_entries(pencil)
    p_prev, p_cur = [Fraction(1)], list(diag[0])
    q_prev, q_cur = [Fraction(0)], [Fraction(1)]
    for i in range(1, pencil.n_plus_1):
        offdiag = _conv(list(sub[i - 1]), list(sup[i - 1]))
        beta = list(diag[i])
        p_prev, p_cur = p_cur, _padd(_conv(beta, p_cur), [-x for x in _conv(offdiag, p_prev)])
        q_prev, q_cur = q_cur, _padd(_conv(beta, q_cur), [-x for x in _conv(offdiag, q_prev)])
    return _trim_exact(p_cur), _trim_exact(q_cur)


def _mp_context(p_exact) -> int:
    """Working precision wide enough to cover the coefficient magnitude span."""
    mags = [abs(c) for c in p_exact if c != 0]
    if not mags:
        return 50
    big, small = max(mags), min(mags)
    span = (len(str(big.numerator)) - len(str(big.denominator))) - (
        len(str(small.numerator)) - len(str(small.denominator))
    )
    return max(50, abs(span) + 40)


def _aberth_refine(p_exact, starts, dps):
    """Simultaneous Newton (Aberth) on the exact polynomial, in extended
    precision; the companion eigenvalues serve as start values."""
    with mp.workdps(dps):
        coef = [mp.mpf(c.numerator) / c.denominator for c in p_exact]
        dcoef = [k * coef[k] for k in range(1, len(coef))]

        def horner(cs, z):
            acc = mp.mpc(0)
            for c in reversed(cs):
                acc = acc * z + c
            return acc

        roots = [mp.mpc(s) for s in starts]
        # tiny deterministic perturbation separates identical companion outputs
        roots = [r * (1 + mp.mpf(10) ** (-dps // 2) * (k + 1)) for k, r in enumerate(roots)]
        tol = mp.mpf(10) ** (-dps + 10)
        for _ in range(200):
            moved = mp.mpf(0)
            for i, r in enumerate(roots):
                pv = horner(coef, r)
                dpv = horner(dcoef, r)
                if pv == 0:
                    continue
                newton = pv / dpv if dpv != 0 else mp.mpc(1)
                corr = mp.mpc(0)
                for j, s in enumerate(roots):
                    if j != i and r != s:
                        corr += 1 / (r - s)
                denom = 1 - newton * corr
                step = newton / denom if denom != 0 else newton
                roots[i] = r - step
                moved = max(moved, abs(step) / max(abs(roots[i]), mp.mpf(1)))
            if moved < tol:
                break
        return roots


def finite_poles(pencil: TridiagPencil):
    """Finite generalized eigenvalues of T0 - z*T1 (= roots of det T(z)) and
    the count of infinite eigenvalues.

    Roots are seeded by the eigenvalues of the scaled companion matrix of the
    determinant polynomial and polished in extended precision.
    """
    p_exact, _ = pencil.determinant_polynomials()
    if all(c == 0 for c in p_exact):
        raise IrregularPencil("det(T0 - z*T1) vanishes identically")
    deg = len(p_exact) - 1
    n_infinite = pencil.n_plus_1 - deg
    if deg == 0:
        return np.array([], dtype=complex), n_infinite
    coef_f = np.array([float(c) for c in p_exact])
    Cmat, scale = companion_matrix(coef_f)
    starts = dense_eigenvalues(Cmat) * scale
    dps = _mp_context(p_exact)
    roots = _aberth_refine(p_exact, starts, dps)
    return np.array([complex(r) for r in roots]), n_infinite


def poles(pencil: TridiagPencil):
    """Alias of :func:`finite_poles`: (finite poles, infinite-eigenvalue count)."""
    return finite_poles(pencil)


@dataclass(frozen=True)
class PartialFractionExpansion:
    """Simple-pole expansion (T(z)^{-1})_{1,1} = sum_j w_j/(tau_j - z) + sigma."""

    poles: np.ndarray
    weights: np.ndarray
    constant: complex

    def __call__(self, z):
        z = np.asarray(z)
        acc = np.full(z.shape, self.constant, dtype=complex)
        for t, w in zip(self.poles, self.weights):
            acc = acc + w / (t - z)
        return acc if acc.ndim else acc[()]

    def __len__(self):
        return len(self.poles)


def pfe(pencil: TridiagPencil, separation_tol: float = 1e-8) -> PartialFractionExpansion:
    """Partial fraction expansion of (T(z)^{-1})_{1,1} = q(z)/p(z).

    Weights follow the residue formula w_j = -q(tau_j)/p'(tau_j), evaluated in
    extended precision; sigma is the z -> infinity limit of q/p: the exact
    leading-coefficient ratio when degrees are equal, 0 when deg q < deg p.
    Pole pairs closer than ``separation_tol * max|tau|`` are rejected, since
    only the simple-pole (diagonal Weierstrass) case is representable.
    """
    p_exact, q_exact = pencil.determinant_polynomials()
    tau, _ = finite_poles(pencil)
    if len(tau) == 0:
        sigma = _sigma_exact(p_exact, q_exact)
        return PartialFractionExpansion(tau, np.array([], dtype=complex), sigma)
    scale = np.abs(tau).max()
    for i in range(len(tau)):
        for j in range(i + 1, len(tau)):
            if abs(tau[i] - tau[j]) < separation_tol * max(scale, 1e-300):
                raise MultiplePoleDetected(
                    f"poles {tau[i]} and {tau[j]} are closer than {separation_tol} * {scale}"
                )
    dps = max(_mp_context(p_exact), _mp_context(q_exact))
    with mp.workdps(dps):
        pc = [mp.mpf(c.numerator) / c.denominator for c in p_exact]
        qc = [mp.mpf(c.numerator) / c.denominator for c in q_exact]
        dpc = [k * pc[k] for k in range(1, len(pc))]

        def horner(cs, z):
            acc = mp.mpc(0)
            for c in reversed(cs):
                acc = acc * z + c
            return acc

        weights = np.array(
            [complex(-horner(qc, mp.mpc(t)) / horner(dpc, mp.mpc(t))) for t in tau]
        )
    sigma = _sigma_exact(p_exact, q_exact)
    return PartialFractionExpansion(tau, weights, sigma)


def pencil_to_text(pencil: TridiagPencil) -> str:
    """Three-column (row, col, value) text, one section per matrix."""
    lines = []
    for name, t in (("T0", pencil.t0), ("T1", pencil.t1)):
        lines.append(f"# {name} {t.n_plus_1}")
        M = t.todense()
        for i in range(t.n_plus_1):
            for j in range(t.n_plus_1):
                if M[i, j] != 0:
                    lines.append(f"{i} {j} {repr(float(M[i, j]))}")
    return "\n".join(lines) + "\n"


def pencil_from_text(text: str) -> TridiagPencil:
    """Parse the format written by :func:`pencil_to_text`."""
    mats = {}
    current = None
    for line in text.strip().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            _, name, dim = line.split()
            current = np.zeros((int(dim), int(dim)))
            mats[name] = current
        else:
            i, j, val = line.split()
            current[int(i), int(j)] = float(val)
    if set(mats) != {"T0", "T1"}:
        raise ValueError("pencil text must contain T0 and T1 sections")
    return TridiagPencil(Tridiag.from_dense(mats["T0"]), Tridiag.from_dense(mats["T1"]))


def _sigma_exact(p_exact, q_exact) -> complex:
    deg_p, deg_q = len(p_exact) - 1, len(q_exact) - 1
    if deg_q < deg_p:
        return 0.0 + 0.0j
    if deg_q > deg_p:
        raise MultiplePoleDetected(
            "deg q > deg p: the expansion has a nonconstant polynomial part"
        )
    return complex(float(q_exact[-1] / p_exact[-1]))
