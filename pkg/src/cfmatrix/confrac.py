"""Continued fractions with polynomial partial numerators and denominators.

A continued fraction  g = b0 + c1/(b1 + c2/(b2 + ...))  is stored as the
coefficient lists of its partial denominators b_i(z) and numerators c_i(z),
each a polynomial in z.  Truncating at level n gives the n-th approximant
g_n = p_n/q_n, a rational function.  This module provides the forward
(numerator/denominator) recursion, the backward tail recursion, equivalence
transforms, contraction, inversion, the Euclidean-algorithm conversion of a
rational function into a continued fraction, and the two built-in regular
C-fractions used by the rest of the package (exponential and sqrt(1+z)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivisionByZero, InvalidScaling, NotACFraction


class Polynomial:
    """Dense polynomial with ascending coefficients.

    The coefficient array is trimmed so that the leading coefficient is
    nonzero unless the polynomial is identically zero (represented by the
    single coefficient 0.0).
    """

    __slots__ = ("coef",)

    def __init__(self, coef):
        c = np.atleast_1d(np.asarray(coef))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a nonempty 1-d sequence")
        if not np.iscomplexobj(c):
            c = c.astype(float)
        n = c.size
        while n > 1 and c[n - 1] == 0:
            n -= 1
        self.coef = c[:n].copy()
        self.coef.setflags(write=False)

    @property
    def degree(self) -> int:
        """Degree; 0 for constants, including the zero polynomial."""
        return len(self.coef) - 1

    @property
    def is_zero(self) -> bool:
        return len(self.coef) == 1 and self.coef[0] == 0

    def __call__(self, z):
        """Horner evaluation; broadcasts over array arguments."""
        out = np.zeros_like(np.asarray(z), dtype=np.result_type(self.coef.dtype, np.asarray(z).dtype))
        for c in self.coef[::-1]:
            out = out * z + c
        return out if out.ndim else out[()]

    def __add__(self, other):
        other = as_polynomial(other)
        a, b = self.coef, other.coef
        if len(a) < len(b):
            a, b = b, a
        out = np.array(a, dtype=np.result_type(a.dtype, b.dtype))
        out[: len(b)] += b
        return Polynomial(out)

    def __neg__(self):
        return Polynomial(-self.coef)

    def __sub__(self, other):
        return self + (-as_polynomial(other))

    def __mul__(self, other):
        other = as_polynomial(other)
        if self.is_zero or other.is_zero:
            return Polynomial([0.0])
        return Polynomial(np.convolve(self.coef, other.coef))

    __rmul__ = __mul__
    __radd__ = __add__

    def deriv(self) -> "Polynomial":
        if self.degree == 0:
            return Polynomial([0.0])
        return Polynomial(self.coef[1:] * np.arange(1, len(self.coef)))

    def monic(self) -> "Polynomial":
        if self.is_zero:
            raise ValueError("zero polynomial has no monic form")
        return Polynomial(self.coef / self.coef[-1])

    def trim(self, tol: float) -> "Polynomial":
        """Drop leading coefficients smaller than tol relative to the largest."""
        scale = np.abs(self.coef).max()
        if scale == 0:
            return Polynomial([0.0])
        c = np.array(self.coef)
        c[np.abs(c) <= tol * scale] = 0.0
        return Polynomial(c)

    def divmod(self, other: "Polynomial"):
        """Quotient and remainder of polynomial long division."""
        other = as_polynomial(other)
        if other.is_zero:
            raise ZeroDivisionError("polynomial division by zero")
        dtype = np.result_type(self.coef.dtype, other.coef.dtype)
        rem = np.array(self.coef, dtype=dtype)
        dq = len(rem) - len(other.coef)
        if dq < 0:
            return Polynomial([0.0]), Polynomial(rem)
        quot = np.zeros(dq + 1, dtype=dtype)
        lead = other.coef[-1]
        for k in range(dq, -1, -1):
            f = rem[k + other.degree] / lead
            quot[k] = f
            rem[k : k + len(other.coef)] -= f * other.coef
            rem[k + other.degree] = 0.0  # eliminated exactly by construction
        if other.degree == 0:
            return Polynomial(quot), Polynomial([0.0])
        return Polynomial(quot), Polynomial(rem[: other.degree])

    def __eq__(self, other):
        other = as_polynomial(other)
        return len(self.coef) == len(other.coef) and bool(np.all(self.coef == other.coef))

    def __hash__(self):
        return hash(tuple(self.coef.tolist()))

    def __repr__(self):
        return f"Polynomial({self.coef.tolist()})"


def as_polynomial(p) -> Polynomial:
    if isinstance(p, Polynomial):
        return p
    return Polynomial(p)


ZERO = Polynomial([0.0])
ONE = Polynomial([1.0])


@dataclass(frozen=True)
class RationalFunction:
    """Quotient of two polynomials.

    Numerator and denominator are never both identically zero.  A zero
    denominator with nonzero numerator represents the constant-infinity
    value that the (total) approximant recursion can produce.
    """

    numerator: Polynomial
    denominator: Polynomial

    def __post_init__(self):
        if self.denominator.is_zero and self.numerator.is_zero:
            raise ZeroDivisionError("rational function 0/0")

    def __call__(self, z):
        return self.numerator(z) / self.denominator(z)


class ContinuedFraction:
    """b0 + c1/(b1 + c2/(b2 + ... + cn/bn)) with polynomial entries.

    ``b`` holds b_0 ... b_n and ``c`` holds c_1 ... c_n.  The finite-fraction
    convention is enforced: once some c_k is identically zero, all later
    levels must have b_j == 1 and c_j == 0.
    """

    __slots__ = ("b", "c", "degree_bound")

    def __init__(self, b, c):
        b = tuple(as_polynomial(x) for x in b)
        c = tuple(as_polynomial(x) for x in c)
        if len(b) != len(c) + 1:
            raise ValueError(f"need len(b) == len(c) + 1, got {len(b)}, {len(c)}")
        cut = None
        for i, ci in enumerate(c):
            if ci.is_zero:
                cut = i
                break
        if cut is not None:
            for j in range(cut, len(c)):
                if not c[j].is_zero or b[j + 1] != ONE:
                    raise ValueError(
                        f"c_{cut + 1} is zero, so all later levels must have b == 1, c == 0"
                    )
        self.b = b
        self.c = c
        self.degree_bound = max(p.degree for p in b + c)

    def __len__(self):
        """Number of fraction levels n (excluding b0)."""
        return len(self.c)

    def __eq__(self, other):
        return isinstance(other, ContinuedFraction) and self.b == other.b and self.c == other.c

    def __repr__(self):
        return f"ContinuedFraction(n={len(self)}, degree_bound={self.degree_bound})"

    def is_regular_cfraction(self) -> bool:
        """True when b0 is constant, every b_i == 1 and every c_i(z) = c_i * z."""
        if self.b[0].degree != 0:
            return False
        if any(bi != ONE for bi in self.b[1:]):
            return False
        for ci in self.c:
            if ci.degree > 1 or (not ci.is_zero and ci.coef[0] != 0):
                return False
        return True

    def cfraction_coefficients(self) -> np.ndarray:
        """The scalars c_1 ... c_n of a regular C-fraction (c_i(z) = c_i * z)."""
        if not self.is_regular_cfraction():
            raise NotACFraction("continued fraction is not a regular C-fraction")
        return np.array([0.0 if ci.is_zero else ci.coef[1] for ci in self.c])


def approximant(cf: ContinuedFraction, n: int) -> RationalFunction:
    """n-th approximant p_n/q_n through the forward three-term recursion."""
    if n > len(cf):
        raise ValueError(f"approximant index {n} exceeds fraction length {len(cf)}")
    p_prev, p = ONE, cf.b[0]
    q_prev, q = ZERO, ONE
    for i in range(1, n + 1):
        p_prev, p = p, cf.b[i] * p + cf.c[i - 1] * p_prev
        q_prev, q = q, cf.b[i] * q + cf.c[i - 1] * q_prev
    return RationalFunction(p, q)


def tails(cf: ContinuedFraction, n: int, z) -> list:
    """Tail values [t_0(z), ..., t_n(z)] with t_n = 0, via the backward recursion."""
    if n > len(cf):
        raise ValueError(f"tail index {n} exceeds fraction length {len(cf)}")
    out = [0.0] * (n + 1)
    t = 0.0
    for i in range(n - 1, -1, -1):
        denom = cf.b[i + 1](z) + t
        if denom == 0:
            raise DivisionByZero(i)
        t = cf.c[i](z) / denom
        if not np.all(np.isfinite(t)):
            raise DivisionByZero(i)
        out[i] = t
    return out


def eval_backward(cf: ContinuedFraction, n: int, z):
    """g_n(z) = b_0(z) + t_0(z) computed through the tail recursion."""
    return cf.b[0](z) + tails(cf, n, z)[0]


def equivalence_transform(cf: ContinuedFraction, d) -> ContinuedFraction:
    """Rescale levels with factors d (d_0 = 1): c_i -> d_{i-1} d_i c_i, b_i -> d_i b_i.

    Every approximant value is unchanged.
    """
    d = np.asarray(d, dtype=float)
    if len(d) != len(cf) + 1:
        raise InvalidScaling(f"need {len(cf) + 1} factors, got {len(d)}")
    if d[0] != 1.0:
        raise InvalidScaling("d[0] must be 1")
    if np.any(d == 0):
        raise InvalidScaling("all scaling factors must be nonzero")
    b = [cf.b[0]] + [Polynomial(d[i] * cf.b[i].coef) for i in range(1, len(cf) + 1)]
    c = [Polynomial(d[i - 1] * d[i] * cf.c[i - 1].coef) for i in range(1, len(cf) + 1)]
    return ContinuedFraction(b, c)


def contract(cf: ContinuedFraction) -> ContinuedFraction:
    """Contract a regular C-fraction so level k of the result equals level 2k.

    The result has partial numerators -c_{2i-2} c_{2i-1} z^2 and partial
    denominators 1 + (c_{2i} + c_{2i-1}) z; its k-th approximant is the
    2k-th approximant of the input.
    """
    cs = cf.cfraction_coefficients()
    b0 = cf.b[0]
    m = len(cs) // 2
    if m == 0:
        return ContinuedFraction([b0], [])
    c = np.concatenate([[0.0], cs])  # 1-based access
    bs = [b0, Polynomial([1.0, c[2]])]
    ns = [Polynomial([0.0, c[1]])]
    for i in range(2, m + 1):
        ns.append(Polynomial([0.0, 0.0, -c[2 * i - 2] * c[2 * i - 1]]))
        bs.append(Polynomial([1.0, c[2 * i] + c[2 * i - 1]]))
    return ContinuedFraction(bs, ns)


def invert(cf: ContinuedFraction) -> ContinuedFraction:
    """Reciprocal continued fraction 0 + 1/(b0 + c1/(b1 + ...)).

    The approximants are the reciprocals of the input's approximants with
    the level index shifted up by one.
    """
    return ContinuedFraction((ZERO,) + cf.b, (ONE,) + cf.c)


def cf_from_rational(r: RationalFunction, tol: float = 1e-13) -> ContinuedFraction:
    """Finite continued fraction from the Euclidean algorithm on p/q.

    The partial denominators are the successive long-division quotients and
    every partial numerator is 1.  Each remainder is normalized to be monic
    (together with the next denominator) to limit coefficient growth; this
    leaves all approximant values unchanged.
    """
    num, den = r.numerator, r.denominator
    if den.is_zero:
        raise ZeroDivisionError("rational function with zero denominator")
    bs = []
    while True:
        quot, rem = num.divmod(den)
        bs.append(quot)
        rem = rem.trim(tol)
        if rem.is_zero:
            break
        lead = rem.coef[-1]
        num, den = Polynomial(den.coef / lead), rem.monic()
    return ContinuedFraction(bs, [ONE] * (len(bs) - 1))


def builder_exp(n: int) -> ContinuedFraction:
    """Regular C-fraction whose approximants are the Pade staircase of e^z.

    Coefficients: b0 = 1, c1 = 1, c_i = -1/(2(i-1)) for even i > 1 and
    c_i = 1/(2i) for odd i > 1.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    cs = [1.0]
    for i in range(2, n + 1):
        cs.append(-1.0 / (2 * (i - 1)) if i % 2 == 0 else 1.0 / (2 * i))
    return ContinuedFraction([ONE] * (n + 1), [Polynomial([0.0, c]) for c in cs])


def builder_sqrt1p(n: int) -> ContinuedFraction:
    """Regular C-fraction for sqrt(1+z): b0 = 1, c1 = 1/2, c_i = 1/4 for i > 1."""
    if n < 1:
        raise ValueError("need n >= 1")
    cs = [0.5] + [0.25] * (n - 1)
    return ContinuedFraction([ONE] * (n + 1), [Polynomial([0.0, c]) for c in cs])


def exp_series(z: float, terms: int = 60) -> float:
    """Plain Taylor-series evaluation of e^z, used as an independent reference."""
    s, t = 0.0, 1.0
    for k in range(1, terms + 1):
        s += t
        t *= z / k
    return s


def to_text(cf: ContinuedFraction) -> str:
    """One line per level: ``i; b_i coefficients; c_i coefficients`` (ascending).

    Decimal literals use shortest round-trip formatting, so parsing the text
    back reproduces the coefficients bit-exactly.
    """
    lines = []
    for i in range(len(cf) + 1):
        bc = ",".join(repr(float(x)) for x in cf.b[i].coef)
        cc = "" if i == 0 else ",".join(repr(float(x)) for x in cf.c[i - 1].coef)
        lines.append(f"{i}; {bc}; {cc}")
    return "\n".join(lines) + "\n"


def from_text(text: str) -> ContinuedFraction:
    """Parse the format written by :func:`to_text`."""
    b, c = [], []
    for line in text.strip().splitlines():
        idx, bc, cc = (part.strip() for part in line.split(";"))
        i = int(idx)
        if i != len(b):
            raise ValueError(f"levels out of order at line {line!r}")
        b.append(Polynomial([float(x) for x in bc.split(",")]))
        if i > 0:
            c.append(Polynomial([float(x) for x in cc.split(",")]))
    return ContinuedFraction(b, c)
