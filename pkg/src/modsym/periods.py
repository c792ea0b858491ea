"""Period integrals and modular symbols via the cusp-expansion factorization.

Every unimodular h factors as (level matrix) * (Atkin-Lehner normalizer) *
(upper-triangular K)/sqrt(v), which turns the slashed form f|h into
e * (k1/k2) * f((k1 w + m)/k2); vertical period integrals then reduce to two
evaluations of the antiderivative per P^1(Z/q) class, giving a 2|P^1| table
that evaluates any symbol through the Manin continued-fraction path.

Sign conventions: P(r) is the period integral from i*infinity to r of f dz;
the real symbol is m_minus(r) = 2 pi Re P(r), the plus symbol is
m_plus(r) = -2 pi Im P(r).  The classical symbol is i * m_minus(r); only the
real convention is stored.  Well-definedness of individual symbols up to
cusp-pair offsets is inherited from the period table's relation residuals,
which the build records and the gates check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .eigenform import Eigenform, TruncationPlan, al_sign, antiderivative_batch
from .exactmath import (
    Mat2,
    P1Class,
    P1Table,
    S_MAT,
    _crt_least_abs,
    atkin_lehner_matrix,
    cf_decompose,
    lift_class,
    p1_table,
    solve_gamma_tilde,
)


@dataclass(frozen=True)
class ExpansionShift:
    """Data of f|h = e * (k1/k2) * f((k1 w + m)/k2) for unimodular h.

    e is the Atkin-Lehner sign at the width v = k1*k2 = q/d, d the gcd of
    the lower-left entry with q, and 0 <= m < k2.  The split-at-i argument
    is (k1*i + m)/k2, whose imaginary part k1/k2 is at least 1/q.
    """

    e: int
    k1: int
    k2: int
    m: int
    d: int
    v: int

    @property
    def arg(self) -> complex:
        return (self.k1 * 1j + self.m) / self.k2


def cusp_shift(h: Mat2, q: int, f: Eigenform) -> ExpansionShift:
    """Factor h through the cusp 1/d machinery and read off the shift data.

    The scaling freedom in the width matrices is fixed by the canonical
    choices inside solve_gamma_tilde and atkin_lehner_matrix, so the result
    is deterministic.  h with lower-left 0 fixes infinity and shifts by an
    integer, which the period-1 expansion absorbs: (e, k1, k2, m) = (1,1,1,0).
    """
    if h.det != 1:
        raise ValueError("cusp_shift needs a determinant-1 matrix")
    if h.c == 0:
        return ExpansionShift(1, 1, 1, 0, q, 1)
    if h.c < 0:
        h = -h
    gamma, alpha = h.c, h.a
    d = math.gcd(gamma, q)
    v = q // d
    gt = solve_gamma_tilde(alpha, gamma, q)
    w_v = atkin_lehner_matrix(v, q)
    k = w_v.adjugate() @ gt.inv_unimodular() @ h
    assert k.c == 0, "cusp factorization must be upper triangular"
    if k.a < 0:
        k = -k
    assert k.a > 0 and k.d > 0 and k.a * k.d == v
    return ExpansionShift(al_sign(f, v), k.a, k.d, k.b % k.d, d, v)


@dataclass
class PeriodTable:
    """One period value per P^1(Z/q) class, certified to tol.

    values[k] is the integral of f dz along the unimodular path
    g(0) -> g(infinity) for the canonical lift g of class k; it is a class
    function because f dz is level-q invariant.  residual_two/three record
    the worst two-term and three-term relation defects measured at build.
    """

    q: int
    tol: float
    classes: P1Table
    values: np.ndarray
    residual_two: float
    residual_three: float

    def index_of(self, c: int, d: int) -> int:
        return self.classes.index_of(c, d)


def _relation_residuals(q: int, classes: P1Table, values: np.ndarray) -> tuple[float, float]:
    # At build time the two-term defect is structurally zero: the expansion
    # shift depends only on the class, so the S-partner reuses the same two
    # antiderivative values with opposite signs (path reversal).  It still
    # guards cached tables, whose values are re-checked after parsing.  The
    # three-term defect spans six independent evaluations and is the real
    # float certification.
    r2 = 0.0
    r3 = 0.0
    for k, (c, d) in enumerate(classes.reps):
        k_s = classes.index_of(d, -c)
        r2 = max(r2, abs(values[k] + values[k_s]))
        k_u = classes.index_of(c + d, -c)
        k_uu = classes.index_of(d, -c - d)
        r3 = max(r3, abs(values[k] + values[k_u] + values[k_uu]))
    return r2, r3


def build_period_table(f: Eigenform, tol: float = 1e-12) -> PeriodTable:
    """Evaluate the period of every class from two antiderivative values.

    Splitting the path at height i gives
    W(g) = -e_g F(arg_g) + e_{gS} F(arg_{gS}); each F evaluation is
    certified to tol/4 so the two-term relation is certified below tol
    (gate 2*tol) and the three-term below 1.5*tol (gate 3*tol).
    """
    q = f.q
    classes = p1_table(q)
    shifts = []
    for k in range(len(classes)):
        g = lift_class_from_index(classes, k)
        shifts.append((cusp_shift(g, q, f), cusp_shift(g @ S_MAT, q, f)))
    plan = TruncationPlan(tol=tol / 4.0, y_min=1.0 / q, n_cap=f.n_max)
    args = np.array([[sh_g.arg, sh_gs.arg] for sh_g, sh_gs in shifts])
    f_vals = antiderivative_batch(f, args.ravel(), plan).reshape(args.shape)
    values = np.empty(len(classes), dtype=np.complex128)
    for k, (sh_g, sh_gs) in enumerate(shifts):
        values[k] = -sh_g.e * f_vals[k, 0] + sh_gs.e * f_vals[k, 1]
    r2, r3 = _relation_residuals(q, classes, values)
    return PeriodTable(q, tol, classes, values, r2, r3)


def lift_class_from_index(classes: P1Table, k: int) -> Mat2:
    c, d = classes.reps[k]
    return lift_class(P1Class(classes.q, c, d))


def period_sum(r: Fraction, table: PeriodTable) -> complex:
    """P(r) along the Manin path; exact 1-periodicity via a mod c reduction."""
    c = r.denominator
    a = r.numerator % c
    total = 0j
    for g in cf_decompose(Fraction(a, c)):
        total += table.values[table.index_of(g.c, g.d)]
    return complex(total)


def hecke_residual(r: Fraction, p: int, f: Eigenform, table: PeriodTable) -> float:
    """Defect of the Hecke identity a_p P(r) = P(pr) + sum_b P((r+b)/p).

    Valid for primes p not dividing the level; every argument stays an exact
    Fraction, so the residual is purely the table's float error.
    """
    if f.q % p == 0:
        raise ValueError(f"{p} divides the level {f.q}")
    lhs = int(f.coeffs[p]) * period_sum(r, table)
    rhs = period_sum(p * r, table)
    for b in range(p):
        rhs += period_sum((r + b) / p, table)
    return abs(lhs - rhs)


@dataclass(frozen=True)
class SymbolValue:
    """Evaluated symbol at a/c: real value, plus part, and the level gcd."""

    numer: int
    denom: int
    d: int
    m_minus: float
    m_plus: float


def symbol(r: Fraction, table: PeriodTable) -> SymbolValue:
    """Both symbol components at the rational r, reduced into [0, 1)."""
    c = r.denominator
    a = r.numerator % c
    p = period_sum(Fraction(a, c), table)
    return SymbolValue(
        numer=a,
        denom=c,
        d=math.gcd(c, table.q),
        m_minus=2.0 * math.pi * p.real,
        m_plus=-2.0 * math.pi * p.imag,
    )


def direct_symbol_oracle(
    r: Fraction, f: Eigenform, t: float | None = None, tol: float = 1e-10
) -> complex:
    """Independent evaluation of P(r) from a single scaled coset matrix.

    Builds the determinant-1 real matrix M = (a sqrt(v), B/sqrt(v);
    c sqrt(v), D/sqrt(v)) carrying i*infinity to r inside the coset of the
    width-v cusp scaling, splits the path at M(it), and evaluates
    P(r) = F(M(it)) - e_v F(it - y/v).  Default t maximizes the smaller of
    the two evaluation heights; refuses with TruncationError when the
    certified truncation at that height exceeds the available coefficients.
    """
    q = f.q
    c = r.denominator
    a = r.numerator % c
    d = math.gcd(c, q)
    v = q // d
    r1 = pow(a % c, -1, c) if c > 1 else 0
    r2 = (c * pow(d % v, -1, v)) % v if v > 1 else 0
    big_d = _crt_least_abs(r1, c, r2, v)
    big_b = (a * big_d - 1) // c
    assert a * big_d - big_b * c == 1
    w_v = atkin_lehner_matrix(v, q)
    y_shift = w_v.b
    if t is None:
        t = abs(big_d) / (c * v)
    im_moebius = t * v / (big_d * big_d + (c * v * t) ** 2)
    plan = TruncationPlan(tol=tol / 2.0, y_min=min(t, im_moebius), n_cap=f.n_max)
    z1 = (a * v * 1j * t + big_b) / (c * v * 1j * t + big_d)
    z2 = -y_shift / v + 1j * t
    f1, f2 = antiderivative_batch(f, [z1, z2], plan)
    return complex(f1 - al_sign(f, v) * f2)


# ---------------------------------------------------------------------------
# Period table cache

_TABLE_MAGIC = "modsym-table v1"


def write_table_cache(path: str, table: PeriodTable) -> None:
    lines = [f"{_TABLE_MAGIC} q={table.q} tol={table.tol:.17g}"]
    for k, (c, d) in enumerate(table.classes.reps):
        w = table.values[k]
        lines.append(f"{c}:{d} {w.real:.17g} {w.imag:.17g}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_table_cache(path: str) -> PeriodTable:
    """Reload a persisted table; %.17g round-trips doubles bit-identically."""
    from .eigenform import CacheFormatError

    with open(path, encoding="ascii") as fh:
        header = fh.readline().strip()
        parts = header.split()
        if (
            len(parts) != 4
            or " ".join(parts[:2]) != _TABLE_MAGIC
            or not parts[2].startswith("q=")
            or not parts[3].startswith("tol=")
        ):
            raise CacheFormatError(f"bad period table header: {header!r}")
        q = int(parts[2][2:])
        tol = float(parts[3][4:])
        classes = p1_table(q)
        values = np.zeros(len(classes), dtype=np.complex128)
        seen = 0
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, re_s, im_s = line.split()
            c_s, d_s = key.split(":")
            k = classes.index_of(int(c_s), int(d_s))
            values[k] = float(re_s) + 1j * float(im_s)
            seen += 1
        if seen != len(classes):
            raise CacheFormatError(
                f"period table has {seen} entries, expected {len(classes)}"
            )
    r2, r3 = _relation_residuals(q, classes, values)
    return PeriodTable(q, tol, classes, values, r2, r3)
