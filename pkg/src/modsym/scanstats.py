"""Farey-point scans and the statistical reports built on them.

Enumerates the sample points a/c with c up to M (optionally restricted to a
gcd class with the level and to a subinterval of [0,1)), evaluates the real
symbol on every point through a vectorized continued-fraction engine, and
reduces the values to per-denominator moment rows.  On top of the rows sit
the variance fits, the mean-decay and Weyl-sum reports, the contiguous
averages, and the standardized distribution report.

Concurrency: scan shards partition the denominator range and each row is
computed wholly inside one shard with a fixed-order pairwise reduction, so
the shard count cannot change any output bit; the fold is concatenation in
ascending c.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import stats as _stats

from .periods import PeriodTable

__all__ = [
    "ScanSpec",
    "AggregateRow",
    "SymbolStore",
    "enumerate_points",
    "scan",
    "mean_decay_report",
    "MeanDecayReport",
    "contiguous_avg",
    "weyl_report",
    "WeylEntry",
    "variance_fit",
    "FitResult",
    "distribution_report",
    "DistributionReport",
    "write_aggregates_csv",
    "write_fit_csv",
    "write_dist_csv",
    "write_weyl_csv",
    "write_contig_csv",
]


@dataclass(frozen=True)
class ScanSpec:
    """What to sample: denominator bound, gcd class, interval, moment depth."""

    q: int
    m_max: int
    d_filter: int | str = "all"
    x0: Fraction = Fraction(0)
    x1: Fraction = Fraction(1)
    k_max: int = 4
    weyl_modes: tuple[int, ...] = (0, 1, 2, 3, 4, 5)

    def __post_init__(self):
        if self.m_max < 1:
            raise ValueError("m_max must be at least 1")
        if not (0 <= self.x0 < self.x1 <= 1):
            raise ValueError("interval must satisfy 0 <= x0 < x1 <= 1")
        if not 1 <= self.k_max <= 8:
            raise ValueError("moment depth must be between 1 and 8")
        if self.d_filter != "all":
            if not isinstance(self.d_filter, int) or self.q % self.d_filter:
                raise ValueError(f"d_filter {self.d_filter!r} does not divide {self.q}")

    @property
    def full_interval(self) -> bool:
        return self.x0 == 0 and self.x1 == 1

    def wants(self, c: int) -> bool:
        return self.d_filter == "all" or math.gcd(c, self.q) == self.d_filter


@dataclass(frozen=True)
class AggregateRow:
    """Per-denominator reduction: moment sums, interval-restricted sums,
    and Weyl accumulators, all over the coprime residues a mod c."""

    c: int
    d: int
    phi: int
    s: tuple[float, ...]
    n_int: int
    s_int: tuple[float, ...]
    weyl: tuple[complex, ...]


def enumerate_points(spec: ScanSpec):
    """Yield the sample points (c, a) in ascending (c, a) order."""
    for c in range(1, spec.m_max + 1):
        if not spec.wants(c):
            continue
        if c == 1:
            yield (1, 0)
            continue
        for a in range(1, c):
            if math.gcd(a, c) == 1:
                yield (c, a)


class SymbolStore:
    """Dense per-denominator symbol arrays with a bounded memo.

    dense(c)[a] is the real symbol at a/c for gcd(a,c)=1 and 0 elsewhere.
    Arrays for c up to memo_threshold are kept; larger ones are recomputed
    per call.  The engine walks every continued fraction for a denominator
    at once: lanes are the coprime residues, each Euclid step advances the
    convergent denominators, and the class of the current path matrix is
    looked up from its bottom row (q_j, +-q_{j-1}) in the flat orbit table.
    """

    def __init__(self, table: PeriodTable, memo_threshold: int = 4096):
        self.table = table
        self.q = table.q
        self.memo_threshold = memo_threshold
        self._flat = np.asarray(table.classes.flat, dtype=np.int64)
        self._w_re = np.ascontiguousarray(table.values.real)
        self._idx_10 = table.index_of(1, 0)
        self._memo: dict[int, np.ndarray] = {}

    def dense(self, c: int) -> np.ndarray:
        if c <= self.memo_threshold:
            got = self._memo.get(c)
            if got is None:
                got = self._memo[c] = self._compute(c)
            return got
        return self._compute(c)

    def _compute(self, c: int) -> np.ndarray:
        out = np.zeros(c)
        q = self.q
        w_first = self._w_re[self._idx_10]
        if c == 1:
            out[0] = 2.0 * math.pi * w_first
            return out
        a = np.arange(c, dtype=np.int64)
        pos = a[np.gcd(a, c) == 1]
        out[pos] = w_first
        u_prev = np.full(pos.shape, c, dtype=np.int64)
        u_cur = pos.copy()
        q_prev = np.zeros(pos.shape, dtype=np.int64)
        q_cur = np.ones(pos.shape, dtype=np.int64)
        sign = 1
        while pos.size:
            b = u_prev // u_cur
            u_prev, u_cur = u_cur, u_prev - b * u_cur
            q_prev, q_cur = q_cur, b * q_cur + q_prev
            cls = self._flat[(q_cur % q) * q + (sign * q_prev) % q]
            out[pos] += self._w_re[cls]
            sign = -sign
            keep = u_cur > 0
            if not keep.all():
                pos = pos[keep]
                u_prev = u_prev[keep]
                u_cur = u_cur[keep]
                q_prev = q_prev[keep]
                q_cur = q_cur[keep]
        out *= 2.0 * math.pi
        return out


def _window(spec: ScanSpec, c: int) -> tuple[int, int]:
    # a/c in [x0, x1) <=> ceil(c x0) <= a < ceil(c x1), exactly in Fraction
    return math.ceil(c * spec.x0), math.ceil(c * spec.x1)


def _row_for(spec: ScanSpec, store: SymbolStore, c: int) -> AggregateRow:
    dense = store.dense(c)
    ar = np.arange(c, dtype=np.int64)
    coprime = np.gcd(ar, c) == 1
    vals = dense[coprime]
    a_cop = ar[coprime]
    phi = int(vals.size)

    sums = []
    power = np.ones_like(vals)
    for _ in range(spec.k_max):
        power = power * vals
        sums.append(float(np.sum(power)))
    if not all(math.isfinite(v) for v in sums):
        raise OverflowError(f"moment accumulator overflowed at c={c}")

    a_lo, a_hi = _window(spec, c)
    in_window = (a_cop >= a_lo) & (a_cop < a_hi)
    vals_int = vals[in_window]
    sums_int = []
    power = np.ones_like(vals_int)
    for _ in range(spec.k_max):
        power = power * vals_int
        sums_int.append(float(np.sum(power)))

    weyl: tuple[complex, ...] = ()
    if spec.weyl_modes:
        base = np.exp((2j * math.pi / c) * a_cop)
        cur = np.ones(phi, dtype=np.complex128)
        n_cur = 0
        by_mode = {}
        for n in sorted({abs(n) for n in spec.weyl_modes}):
            while n_cur < n:
                cur = cur * base
                n_cur += 1
            by_mode[n] = complex(np.sum(cur))
        # e(-n a/c) sums are exact conjugates of the e(n a/c) sums
        weyl = tuple(
            by_mode[n] if n >= 0 else by_mode[-n].conjugate()
            for n in spec.weyl_modes
        )

    return AggregateRow(
        c=c,
        d=math.gcd(c, spec.q),
        phi=phi,
        s=tuple(sums),
        n_int=int(vals_int.size),
        s_int=tuple(sums_int),
        weyl=weyl,
    )


def scan(spec: ScanSpec, store: SymbolStore, shards: int = 1) -> list[AggregateRow]:
    """One AggregateRow per admissible denominator, in ascending c."""
    cs = [c for c in range(1, spec.m_max + 1) if spec.wants(c)]
    if shards <= 1 or len(cs) < 2 * shards:
        return [_row_for(spec, store, c) for c in cs]
    blocks = [cs[i::shards] for i in range(shards)]
    with ThreadPoolExecutor(max_workers=shards) as pool:
        parts = list(
            pool.map(lambda block: [_row_for(spec, store, c) for c in block], blocks)
        )
    rows = [row for part in parts for row in part]
    rows.sort(key=lambda row: row.c)
    return rows


# ---------------------------------------------------------------------------
# Reports on top of the rows


@dataclass(frozen=True)
class MeanDecayReport:
    """Normalized means |S1/phi| sqrt(c), with the dyadic-window summary."""

    cs: np.ndarray
    normalized: np.ndarray
    late_window: tuple[int, int]
    early_window: tuple[int, int]
    max_late: float
    median_early: float


def mean_decay_report(rows: list[AggregateRow]) -> MeanDecayReport:
    """Summarize the root-denominator decay of the per-c means.

    The late window is (M/2, M] and the early one (M/16, M/8]; the headline
    comparison is max(late) against the median of the early window.
    """
    cs = np.array([row.c for row in rows])
    means = np.array([row.s[0] / row.phi for row in rows])
    normalized = np.abs(means) * np.sqrt(cs)
    m = int(cs.max())
    late = (m // 2, m)
    early = (m // 16, m // 8)
    in_late = (cs > late[0]) & (cs <= late[1])
    in_early = (cs > early[0]) & (cs <= early[1])
    if not in_late.any() or not in_early.any():
        raise ValueError("not enough rows to fill the dyadic windows")
    return MeanDecayReport(
        cs=cs,
        normalized=normalized,
        late_window=late,
        early_window=early,
        max_late=float(normalized[in_late].max()),
        median_early=float(np.median(normalized[in_early])),
    )


def _divisors(c: int) -> list[int]:
    small, large = [], []
    k = 1
    while k * k <= c:
        if c % k == 0:
            small.append(k)
            if k * k != c:
                large.append(c // k)
        k += 1
    return small + large[::-1]


def contiguous_avg(store: SymbolStore, m_max: int, xs: list[Fraction]) -> np.ndarray:
    """Average of the contiguous sums G_c(x) = (1/c) sum_{0<=a<=floor(cx)} of
    the symbol at a/c (unreduced a evaluated via its reduced fraction), over
    all denominators c <= M; real convention.

    Thresholds floor(c x) are exact because the grid points are Fractions.
    """
    for x in xs:
        if not 0 <= x <= 1:
            raise ValueError("grid points must lie in [0, 1]")
    out = np.zeros(len(xs))
    for c in range(1, m_max + 1):
        v_full = np.empty(c)
        for g in _divisors(c):
            v_full[::g] = store.dense(c // g)  # ascending g: last write is g=gcd
        pref = np.cumsum(v_full)
        for i, x in enumerate(xs):
            k = (c * x.numerator) // x.denominator
            if k >= c:
                out[i] += (pref[c - 1] + v_full[0]) / c  # a=c term equals a=0
            else:
                out[i] += pref[k] / c
    return out / m_max


@dataclass(frozen=True)
class WeylEntry:
    n: int
    total: complex
    ratio: float


def weyl_report(spec: ScanSpec, rows: list[AggregateRow]) -> list[WeylEntry]:
    """Exponential-sum totals per mode with |total|/count ratios.

    The n=0 entry equals the sample count exactly.
    """
    count = sum(row.phi for row in rows)
    entries = []
    for j, n in enumerate(spec.weyl_modes):
        total = sum((row.weyl[j] for row in rows), start=0j)
        entries.append(WeylEntry(n=n, total=total, ratio=abs(total) / count))
    return entries


@dataclass(frozen=True)
class FitResult:
    """Variance-law fits for one gcd class, in both sign conventions.

    fixed_slope_shift_* pins the slope at the theoretical value and averages
    the residual with phi(c) weights; slope/shift are the free weighted
    least squares in log c.  Paper-convention values are the negations of
    the real-convention ones (the paper symbol is i times the real one).
    """

    d: int
    n_rows: int
    weight: float
    fixed_slope_shift_real: float
    fixed_slope_shift_paper: float
    slope_real: float
    shift_real: float
    slope_paper: float
    shift_paper: float
    residual_rms: float


def _fit_class(cs, phis, variances, slope_real: float) -> tuple[float, ...]:
    x = np.log(cs)
    w = phis.astype(np.float64)
    y = variances
    sw = float(np.sum(w))
    fixed = float(np.sum(w * (y - slope_real * x)) / sw)
    sx = float(np.sum(w * x))
    sxx = float(np.sum(w * x * x))
    sy = float(np.sum(w * y))
    sxy = float(np.sum(w * x * y))
    denom = sw * sxx - sx * sx
    if denom <= 0:
        raise ValueError("need at least two distinct denominators to fit")
    slope = (sw * sxy - sx * sy) / denom
    shift = (sxx * sy - sx * sxy) / denom
    resid = y - slope * x - shift
    rms = math.sqrt(float(np.sum(w * resid * resid)) / sw)
    return fixed, slope, shift, rms


def variance_fit(
    rows: list[AggregateRow], slope_real: float, c_min: int = 2
) -> dict[int, FitResult]:
    """Per-gcd-class shift estimates against Var_real(c) = slope log c + D.

    Uses rows with c >= c_min (log c = 0 makes c = 1 uninformative for the
    free fit and its phi-weight is negligible for the fixed one).
    """
    by_d: dict[int, list[AggregateRow]] = {}
    for row in rows:
        if row.c >= c_min:
            by_d.setdefault(row.d, []).append(row)
    out = {}
    for d, group in sorted(by_d.items()):
        cs = np.array([row.c for row in group], dtype=np.float64)
        phis = np.array([row.phi for row in group], dtype=np.int64)
        s1 = np.array([row.s[0] for row in group])
        s2 = np.array([row.s[1] for row in group])
        variances = s2 / phis - (s1 / phis) ** 2
        fixed, slope, shift, rms = _fit_class(cs, phis, variances, slope_real)
        out[d] = FitResult(
            d=d,
            n_rows=len(group),
            weight=float(phis.sum()),
            fixed_slope_shift_real=fixed,
            fixed_slope_shift_paper=-fixed,
            slope_real=slope,
            shift_real=shift,
            slope_paper=-slope,
            shift_paper=-shift,
            residual_rms=rms,
        )
    if not out:
        raise ValueError("no rows left after the c_min cut")
    return out


@dataclass(frozen=True)
class DistributionReport:
    """Standardized-sample statistics under both variance normalizations.

    The slope-only normalization divides by sqrt(slope * log c(r)) where
    c(r) = c*sqrt(q/d) is the scaled denominator the variance law is stated
    in; the shifted one divides by sqrt(slope * log c + shift), the fitted
    empirical law (whose shift absorbs the same class constant).  Moments
    are raw sample moments of the standardized values; the KS statistic is
    the one-sample sup distance to the standard normal CDF.
    """

    d: int
    c_min: int
    c_max: int
    x0: Fraction
    x1: Fraction
    n_sample: int
    shift_used: float
    moments_shift: tuple[float, ...]
    moments_slope: tuple[float, ...]
    ks_shift: float
    ks_slope: float
    hist_edges: np.ndarray
    hist_counts: np.ndarray


def distribution_report(
    store: SymbolStore,
    slope_real: float,
    shift_real: float,
    d: int = 1,
    c_min: int = 1,
    c_max: int = 4000,
    x0: Fraction = Fraction(0),
    x1: Fraction = Fraction(1),
    k_max: int = 6,
    bins: int = 100,
    span: float = 5.0,
) -> DistributionReport:
    """Collect the symbol values of one gcd class, standardize, and compare
    against the standard normal: moments up to k_max, KS distance, histogram.
    """
    q = store.q
    half_log_class = 0.5 * math.log(q / d)
    zs_shift = []
    zs_slope = []
    for c in range(max(c_min, 1), c_max + 1):
        if math.gcd(c, q) != d:
            continue
        var_slope = slope_real * (math.log(c) + half_log_class)
        var_shift = slope_real * math.log(c) + shift_real
        if var_slope <= 0 or var_shift <= 0:
            raise ValueError(
                f"modelled variance is not positive at c={c}; raise c_min"
            )
        dense = store.dense(c)
        ar = np.arange(c, dtype=np.int64)
        ok = np.gcd(ar, c) == 1
        a_lo = math.ceil(c * x0)
        a_hi = math.ceil(c * x1)
        ok &= (ar >= a_lo) & (ar < a_hi)
        vals = dense[ok]
        zs_shift.append(vals / math.sqrt(var_shift))
        zs_slope.append(vals / math.sqrt(var_slope))
    if not zs_shift:
        raise ValueError("empty sample: no admissible denominators")
    z_shift = np.concatenate(zs_shift)
    z_slope = np.concatenate(zs_slope)

    def raw_moments(z):
        mts = []
        power = np.ones_like(z)
        for _ in range(k_max):
            power = power * z
            mts.append(float(np.sum(power)) / z.size)
        return tuple(mts)

    edges = np.linspace(-span, span, bins + 1)
    counts, _ = np.histogram(z_shift, bins=edges)
    return DistributionReport(
        d=d,
        c_min=c_min,
        c_max=c_max,
        x0=x0,
        x1=x1,
        n_sample=int(z_shift.size),
        shift_used=shift_real,
        moments_shift=raw_moments(z_shift),
        moments_slope=raw_moments(z_slope),
        ks_shift=float(_stats.kstest(z_shift, "norm").statistic),
        ks_slope=float(_stats.kstest(z_slope, "norm").statistic),
        hist_edges=edges,
        hist_counts=counts,
    )


# ---------------------------------------------------------------------------
# CSV writers (17 significant digits throughout)


def _g(x: float) -> str:
    return format(float(x), ".17g")


def _open_csv(path: str, fingerprint: str | None):
    fh = open(path, "w", encoding="ascii", newline="")
    if fingerprint:
        fh.write(f"# fingerprint={fingerprint}\n")
    return fh


def write_aggregates_csv(
    path: str, spec: ScanSpec, rows: list[AggregateRow], fingerprint: str | None = None
) -> None:
    ks = range(1, spec.k_max + 1)
    with _open_csv(path, fingerprint) as fh:
        head = ["c", "d", "phi"]
        head += [f"S{k}" for k in ks]
        head += ["I_count"] + [f"I_S{k}" for k in ks]
        fh.write(",".join(head) + "\n")
        for row in rows:
            cells = [str(row.c), str(row.d), str(row.phi)]
            cells += [_g(v) for v in row.s]
            cells += [str(row.n_int)] + [_g(v) for v in row.s_int]
            fh.write(",".join(cells) + "\n")


def write_fit_csv(
    path: str, fits: dict[int, FitResult], fingerprint: str | None = None
) -> None:
    with _open_csv(path, fingerprint) as fh:
        fh.write(
            "d,slope_real,shift_real,slope_paper,shift_paper,fixed_slope_shift\n"
        )
        for d in sorted(fits):
            r = fits[d]
            fh.write(
                ",".join(
                    [
                        str(d),
                        _g(r.slope_real),
                        _g(r.shift_real),
                        _g(r.slope_paper),
                        _g(r.shift_paper),
                        _g(r.fixed_slope_shift_paper),
                    ]
                )
                + "\n"
            )


def write_dist_csv(
    path: str, report: DistributionReport, fingerprint: str | None = None
) -> None:
    with _open_csv(path, fingerprint) as fh:
        fh.write("bin_lo,bin_hi,count,phi_cdf\n")
        for lo, hi, n in zip(
            report.hist_edges[:-1], report.hist_edges[1:], report.hist_counts
        ):
            fh.write(
                f"{_g(lo)},{_g(hi)},{int(n)},{_g(_stats.norm.cdf(hi))}\n"
            )


def write_weyl_csv(
    path: str, entries: list[WeylEntry], fingerprint: str | None = None
) -> None:
    with _open_csv(path, fingerprint) as fh:
        fh.write("n,re,im,ratio\n")
        for e in entries:
            fh.write(
                f"{e.n},{_g(e.total.real)},{_g(e.total.imag)},{_g(e.ratio)}\n"
            )


def write_contig_csv(
    path: str,
    xs: list[Fraction],
    a_m: np.ndarray,
    ghat_vals: np.ndarray,
    fingerprint: str | None = None,
) -> None:
    with _open_csv(path, fingerprint) as fh:
        fh.write("x,A_M_real,ghat\n")
        for x, a, g in zip(xs, a_m, ghat_vals):
            fh.write(f"{_g(float(x))},{_g(a)},{_g(g)}\n")
