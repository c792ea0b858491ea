"""Newform data attached to a rational elliptic curve of squarefree conductor.

Prime coefficients come from projective point counts (singular points
included, so multiplicative primes give +-1 directly), the full coefficient
array from the Hecke recursions, and the analytic side provides certified
truncation plans, the antiderivative of the form, and the central L-value.
"""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .exactmath import divisors_squarefree, squarefree_factors

log = logging.getLogger("modsym")

TOL_FLOOR = 1e-14


class TruncationError(ValueError):
    """A certified truncation is not achievable with the available data."""


class CacheFormatError(ValueError):
    """A cache file failed header or body validation."""


class ConductorError(ValueError):
    """Curve data inconsistent with the declared level."""


@dataclass(frozen=True)
class CurveSpec:
    """Integral Weierstrass model [a1, a2, a3, a4, a6] with declared level q.

    The model is assumed minimal (user responsibility); validation is weak:
    q must be squarefree, exceed 1, and divide the discriminant.
    """

    a1: int
    a2: int
    a3: int
    a4: int
    a6: int
    q: int

    def __post_init__(self):
        if self.q <= 1:
            raise ValueError("level must exceed 1")
        squarefree_factors(self.q)
        if self.discriminant % self.q != 0:
            raise ValueError(
                f"declared level {self.q} does not divide the discriminant "
                f"{self.discriminant}"
            )

    @property
    def b2(self) -> int:
        return self.a1 * self.a1 + 4 * self.a2

    @property
    def b4(self) -> int:
        return 2 * self.a4 + self.a1 * self.a3

    @property
    def b6(self) -> int:
        return self.a3 * self.a3 + 4 * self.a6

    @property
    def b8(self) -> int:
        return (
            self.a1 * self.a1 * self.a6
            + 4 * self.a2 * self.a6
            - self.a1 * self.a3 * self.a4
            + self.a2 * self.a3 * self.a3
            - self.a4 * self.a4
        )

    @property
    def discriminant(self) -> int:
        b2, b4, b6, b8 = self.b2, self.b4, self.b6, self.b8
        return -b2 * b2 * b8 - 8 * b4 ** 3 - 27 * b6 * b6 + 9 * b2 * b4 * b6


def count_points(curve: CurveSpec, p: int) -> int:
    """Trace a_p = p + 1 - #W(F_p), counting every projective point.

    Singular points are counted, so multiplicative primes yield +1 (split)
    or -1 (nonsplit) and additive primes yield 0.  p = 2, 3 are counted by
    full enumeration; p > 3 through the Legendre character sum on the
    completed-square quartic-free form 4x^3 + b2 x^2 + 2 b4 x + b6.
    """
    if p < 2:
        raise ValueError("p must be a prime >= 2")
    if p <= 3:
        n_affine = 0
        for x in range(p):
            rhs = (x * x * x + curve.a2 * x * x + curve.a4 * x + curve.a6) % p
            for y in range(p):
                if (y * y + curve.a1 * x * y + curve.a3 * y) % p == rhs:
                    n_affine += 1
        return p + 1 - (n_affine + 1)
    x = np.arange(p, dtype=np.int64)
    qr = np.full(p, -1, dtype=np.int64)
    qr[(x * x) % p] = 1
    qr[0] = 0
    b2 = curve.b2 % p
    b4_twice = (2 * curve.b4) % p
    b6 = curve.b6 % p
    rhs = (((4 * x + b2) * x + b4_twice) % p * x + b6) % p
    return -int(qr[rhs].sum())


def _smallest_prime_factors(n_max: int) -> list[int]:
    spf = list(range(n_max + 1))
    for p in range(2, math.isqrt(n_max) + 1):
        if spf[p] == p:
            for m in range(p * p, n_max + 1, p):
                if spf[m] == m:
                    spf[m] = p
    return spf


def hecke_extend(a_p: dict[int, int], q: int, n_max: int) -> np.ndarray:
    """Full coefficient array a(1..n_max) from prime traces via the recursions.

    a(p^{k+1}) = a(p) a(p^k) - p a(p^{k-1}) at good p, a(p^k) = a(p)^k at
    p | q, multiplicative across coprime factors.
    """
    spf = _smallest_prime_factors(n_max)
    a = np.zeros(n_max + 1, dtype=np.int64)
    if n_max >= 1:
        a[1] = 1
    for n in range(2, n_max + 1):
        p = spf[n]
        m = n // p
        if m == 1:
            a[n] = a_p[p]
        elif m % p or q % p == 0:
            a[n] = a[p] * a[m]
        else:
            a[n] = a[p] * a[m] - p * a[m // p]
    return a


@dataclass
class Eigenform:
    """Coefficient data a(1..n_max) plus the prime Atkin-Lehner signs."""

    q: int
    coeffs: np.ndarray
    al_signs: dict[int, int]
    curve: CurveSpec | None = None
    prime_traces: dict[int, int] = field(default_factory=dict)

    @property
    def n_max(self) -> int:
        return len(self.coeffs) - 1


def al_sign(f: Eigenform, v: int) -> int:
    """Atkin-Lehner eigenvalue for the divisor v of the level (multiplicative)."""
    if v < 1 or f.q % v != 0:
        raise ValueError(f"{v} does not divide the level {f.q}")
    e = 1
    for p in squarefree_factors(v) if v > 1 else []:
        e *= f.al_signs[p]
    return e


def build_eigenform(curve: CurveSpec, n_max: int = 100000) -> Eigenform:
    """Count points at every prime up to n_max and extend multiplicatively.

    Rejects curves whose reduction type contradicts the declared squarefree
    level: a_p must be +-1 at p | q (additive reduction or a unit-distance
    miss both mean the conductor is not the declared q).
    """
    if n_max < 1:
        raise ValueError("n_max must be positive")
    spf = _smallest_prime_factors(n_max)
    primes = [p for p in range(2, n_max + 1) if spf[p] == p]
    traces: dict[int, int] = {}
    for p in primes:
        traces[p] = count_points(curve, p)
    for p in squarefree_factors(curve.q):
        if p <= n_max and traces[p] not in (1, -1):
            raise ConductorError(
                f"conductor mismatch: a_{p} = {traces[p]} at p | q "
                f"(expected +-1 for multiplicative reduction)"
            )
    for p in primes:
        if curve.q % p != 0 and traces[p] ** 2 > 4 * p:
            raise ConductorError(
                f"conductor mismatch: |a_{p}| exceeds the Hasse bound at a "
                f"prime not dividing the declared level"
            )
    coeffs = hecke_extend(traces, curve.q, n_max)
    signs = {p: -traces[p] for p in squarefree_factors(curve.q)}
    return Eigenform(curve.q, coeffs, signs, curve, traces)


# ---------------------------------------------------------------------------
# Certified truncation


def tail_bound(n: int, y: float) -> float:
    """Rigorous bound on sum_{k>n} 2k e^{-2 pi k y} (coefficients obey |a(k)| <= 2k)."""
    x = math.exp(-2.0 * math.pi * y)
    return 2.0 * x ** (n + 1) * ((n + 1) * (1.0 - x) + x) / (1.0 - x) ** 2


def terms_needed(y: float, tol: float) -> int:
    """Smallest series length whose certified tail is below tol at height y."""
    if y <= 0.0:
        raise ValueError("evaluation height must be positive")
    if tol < TOL_FLOOR:
        raise TruncationError(
            f"tolerance {tol:g} is below the float64 rounding floor {TOL_FLOOR:g}; "
            f"a certified truncation at that accuracy is not achievable"
        )
    n = 1
    while tail_bound(n, y) >= tol:
        n *= 2
        if n > 1 << 40:
            raise TruncationError(f"no feasible truncation at y={y:g}, tol={tol:g}")
    lo, hi = n // 2, n
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if tail_bound(mid, y) < tol:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class TruncationPlan:
    """Certified truncation: guarantees tail < tol for heights >= y_min.

    n_cap is the number of coefficients actually available; a plan that
    would need more refuses with TruncationError rather than degrade.
    """

    tol: float
    y_min: float
    n_cap: int

    def __post_init__(self):
        terms = terms_needed(self.y_min, self.tol)
        if terms > self.n_cap:
            raise TruncationError(
                f"certified truncation at height {self.y_min:g} and tolerance "
                f"{self.tol:g} needs {terms} coefficients but only {self.n_cap} "
                f"are available"
            )

    def terms(self, y: float) -> int:
        if y < self.y_min * (1.0 - 1e-12):
            raise ValueError(f"height {y:g} below the planned minimum {self.y_min:g}")
        return terms_needed(y, self.tol)


def plan_for(f: Eigenform, y_min: float, tol: float) -> TruncationPlan:
    return TruncationPlan(tol=tol, y_min=y_min, n_cap=f.n_max)


# ---------------------------------------------------------------------------
# Series evaluation

_CHUNK = 1 << 21


def antiderivative_batch(f: Eigenform, zs, plan: TruncationPlan) -> np.ndarray:
    """Antiderivative F(z) = sum a(n)/(2 pi i n) e(nz) at each z, certified by plan.

    F vanishes at i*infinity and has period 1; the plan's tail bound (stated
    for the form itself) dominates the antiderivative's tail term by term.
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=np.complex128))
    n_terms = plan.terms(float(zs.imag.min()))
    ns = np.arange(1, n_terms + 1)
    coef = f.coeffs[1 : n_terms + 1] / (2j * np.pi * ns)
    out = np.empty(zs.shape, dtype=np.complex128)
    step = max(1, _CHUNK // max(n_terms, 1))
    for i in range(0, zs.size, step):
        block = zs[i : i + step, None]
        out[i : i + step] = np.sum(np.exp(2j * np.pi * block * ns) * coef, axis=1)
    return out


def antiderivative_F(f: Eigenform, z: complex, plan: TruncationPlan) -> complex:
    return complex(antiderivative_batch(f, [z], plan)[0])


def form_values(f: Eigenform, zs, tol: float = 1e-10) -> np.ndarray:
    """The form itself, f(z) = sum a(n) e(nz), certified to tol at each z."""
    zs = np.atleast_1d(np.asarray(zs, dtype=np.complex128))
    n_terms = terms_needed(float(zs.imag.min()), tol)
    if n_terms > f.n_max:
        raise TruncationError(
            f"form evaluation at height {float(zs.imag.min()):g} needs {n_terms} "
            f"coefficients but only {f.n_max} are available"
        )
    ns = np.arange(1, n_terms + 1)
    coef = f.coeffs[1 : n_terms + 1].astype(np.float64)
    out = np.empty(zs.shape, dtype=np.complex128)
    step = max(1, _CHUNK // max(n_terms, 1))
    for i in range(0, zs.size, step):
        block = zs[i : i + step, None]
        out[i : i + step] = np.sum(np.exp(2j * np.pi * block * ns) * coef, axis=1)
    return out


def lfun1(f: Eigenform, tol: float = 1e-12) -> float:
    """Central L-value via the exponentially convergent sign-folded series.

    Equals (1 - e_q) sum a(n)/n e^{-2 pi n / sqrt(q)}; identically zero when
    the Fricke sign e_q is +1 (odd functional equation).
    """
    e_q = al_sign(f, f.q)
    if e_q == 1:
        return 0.0
    x = math.exp(-2.0 * math.pi / math.sqrt(f.q))
    n_terms = max(1, math.ceil(math.log(2.0 / (tol * (1.0 - x))) / (2.0 * math.pi / math.sqrt(f.q))))
    if n_terms > f.n_max:
        raise TruncationError("not enough coefficients for the requested L-value tolerance")
    ns = np.arange(1, n_terms + 1)
    series = np.sum(f.coeffs[1 : n_terms + 1] / ns * np.exp(-2.0 * np.pi * ns / math.sqrt(f.q)))
    return float((1 - e_q) * series)


# ---------------------------------------------------------------------------
# Coefficient cache

_COEFFS_MAGIC = "modsym-coeffs v1"


def write_coeffs_cache(path: str, f: Eigenform) -> None:
    lines = [f"{_COEFFS_MAGIC} q={f.q} N={f.n_max}"]
    lines += [f"{n} {int(f.coeffs[n])}" for n in range(1, f.n_max + 1)]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_coeffs_cache(path: str) -> tuple[int, np.ndarray]:
    with open(path, encoding="ascii") as fh:
        header = fh.readline().strip()
        parts = header.split()
        if (
            len(parts) != 4
            or " ".join(parts[:2]) != _COEFFS_MAGIC
            or not parts[2].startswith("q=")
            or not parts[3].startswith("N=")
        ):
            raise CacheFormatError(f"bad coefficient cache header: {header!r}")
        q = int(parts[2][2:])
        n_max = int(parts[3][2:])
        coeffs = np.zeros(n_max + 1, dtype=np.int64)
        count = 0
        for line in fh:
            line = line.strip()
            if not line:
                continue
            n_str, a_str = line.split()
            n = int(n_str)
            if not 1 <= n <= n_max:
                raise CacheFormatError(f"coefficient index {n} out of range")
            coeffs[n] = int(a_str)
            count += 1
        if count != n_max:
            raise CacheFormatError(
                f"coefficient cache has {count} entries, header says {n_max}"
            )
    return q, coeffs


def load_or_build_eigenform(
    curve: CurveSpec, n_max: int, cache_dir: str | None = None
) -> Eigenform:
    """Eigenform with cache-backed coefficients; corrupt caches are rebuilt."""
    if cache_dir is None:
        return build_eigenform(curve, n_max)
    os.makedirs(cache_dir, exist_ok=True)
    path = os.path.join(cache_dir, f"coeffs-q{curve.q}-N{n_max}.txt")
    if os.path.exists(path):
        try:
            q, coeffs = read_coeffs_cache(path)
            if q != curve.q or len(coeffs) - 1 < n_max:
                raise CacheFormatError("cache does not match the requested build")
            traces = _traces_from_coeffs(coeffs, n_max)
            signs = {p: -int(coeffs[p]) for p in squarefree_factors(curve.q)}
            return Eigenform(curve.q, coeffs[: n_max + 1], signs, curve, traces)
        except (CacheFormatError, ValueError) as exc:
            log.warning("coefficient cache %s is unusable (%s); rebuilding", path, exc)
    f = build_eigenform(curve, n_max)
    write_coeffs_cache(path, f)
    return f


def _traces_from_coeffs(coeffs: np.ndarray, n_max: int) -> dict[int, int]:
    spf = _smallest_prime_factors(n_max)
    return {p: int(coeffs[p]) for p in range(2, n_max + 1) if spf[p] == p}
