"""Command-line front end: configuration, caching, and report emission.

Configuration is a flat key=value file plus CLI flag overrides; every
result-affecting field feeds a sha256 fingerprint that is embedded in each
CSV report, so outputs are traceable to the exact run parameters.  Exit
codes: 0 success, 2 validation error, 3 gate failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import random
import sys
from dataclasses import dataclass, replace
from fractions import Fraction

from .eigenform import (
    CacheFormatError,
    ConductorError,
    CurveSpec,
    Eigenform,
    TruncationError,
    lfun1,
    load_or_build_eigenform,
)
from .periods import (
    PeriodTable,
    build_period_table,
    direct_symbol_oracle,
    hecke_residual,
    period_sum,
    read_table_cache,
    symbol,
    write_table_cache,
)
from .scanstats import (
    ScanSpec,
    SymbolStore,
    contiguous_avg,
    distribution_report,
    mean_decay_report,
    scan,
    variance_fit,
    weyl_report,
    write_aggregates_csv,
    write_contig_csv,
    write_dist_csv,
    write_fit_csv,
    write_weyl_csv,
)
from .theory import (
    build_theory,
    default_fixture_path,
    ghat,
    load_lvalue_fixture,
    petersson_quadrature,
    shift_value,
    slope_from_L,
    sym2_l_from_petersson,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_GATE = 3


class GateFailure(RuntimeError):
    """A consistency gate tripped; the command exits with code 3."""


@dataclass
class RunConfig:
    q: int = 15
    curve: tuple[int, int, int, int, int] = (1, 1, 1, -10, -10)
    label: str = "15.a1"
    m_max: int = 10000
    d_filter: int | str = "all"
    x0: Fraction = Fraction(0)
    x1: Fraction = Fraction(1)
    k_max: int = 4
    weyl_modes: tuple[int, ...] = (0, 1, 2, 3, 4, 5)
    tol: float = 1e-12
    n_max: int = 100000
    memo_threshold: int = 4096
    shards: int = 1
    seed: int = 1729
    cache_dir: str = ".modsym-cache"
    fixture: str | None = None
    out_dir: str = "."

    def fingerprint(self) -> str:
        """12-hex digest of the result-affecting fields.

        Path fields (cache_dir, fixture, out_dir), the shard count, and the
        memo threshold are excluded: shards and memo size provably never
        change an output bit.
        """
        payload = repr(
            (
                self.q,
                self.curve,
                self.label,
                self.m_max,
                str(self.d_filter),
                str(self.x0),
                str(self.x1),
                self.k_max,
                self.weyl_modes,
                self.tol,
                self.n_max,
                self.seed,
            )
        )
        return hashlib.sha256(payload.encode("ascii")).hexdigest()[:12]

    def fixture_path(self) -> str:
        return self.fixture if self.fixture else default_fixture_path()

    def scan_spec(self) -> ScanSpec:
        return ScanSpec(
            q=self.q,
            m_max=self.m_max,
            d_filter=self.d_filter,
            x0=self.x0,
            x1=self.x1,
            k_max=self.k_max,
            weyl_modes=self.weyl_modes,
        )


# ---------------------------------------------------------------------------
# Configuration parsing


def _parse_curve(text: str) -> tuple[int, int, int, int, int]:
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 5:
        raise ValueError("curve needs exactly five comma-separated integers")
    return tuple(parts)


def _parse_interval(text: str) -> tuple[Fraction, Fraction]:
    lo, _, hi = text.partition(":")
    if not hi:
        raise ValueError("interval must look like x0:x1, e.g. 0.1:0.35")
    return Fraction(lo), Fraction(hi)


def _parse_d(text: str) -> int | str:
    return "all" if text == "all" else int(text)


def _parse_weyl(text: str) -> tuple[int, ...]:
    if not text.strip():
        return ()
    return tuple(int(p) for p in text.split(","))


_CONFIG_KEYS = {
    "q": ("q", int),
    "curve": ("curve", _parse_curve),
    "label": ("label", str),
    "M": ("m_max", int),
    "d": ("d_filter", _parse_d),
    "interval": ("interval", _parse_interval),
    "k_max": ("k_max", int),
    "weyl": ("weyl_modes", _parse_weyl),
    "tol": ("tol", float),
    "n_max": ("n_max", int),
    "memo_threshold": ("memo_threshold", int),
    "shards": ("shards", int),
    "seed": ("seed", int),
    "cache_dir": ("cache_dir", str),
    "fixture": ("fixture", str),
    "out_dir": ("out_dir", str),
}


def load_config_file(path: str) -> dict:
    """Flat key=value lines; '#' starts a comment; unknown keys are errors."""
    updates: dict = {}
    with open(path, encoding="ascii") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if not eq or key not in _CONFIG_KEYS:
                raise ValueError(f"bad config line: {raw.strip()!r}")
            field, conv = _CONFIG_KEYS[key]
            parsed = conv(value)
            if field == "interval":
                updates["x0"], updates["x1"] = parsed
            else:
                updates[field] = parsed
    return updates


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        cfg = replace(cfg, **load_config_file(args.config))
    overrides: dict = {}
    for flag, key in [
        ("q", "q"),
        ("M", "m_max"),
        ("k_max", "k_max"),
        ("tol", "tol"),
        ("n_max", "n_max"),
        ("memo_threshold", "memo_threshold"),
        ("shards", "shards"),
        ("seed", "seed"),
        ("cache_dir", "cache_dir"),
        ("fixture", "fixture"),
        ("out_dir", "out_dir"),
        ("label", "label"),
    ]:
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "curve", None) is not None:
        overrides["curve"] = _parse_curve(args.curve)
    if getattr(args, "d", None) is not None:
        overrides["d_filter"] = _parse_d(args.d)
    if getattr(args, "interval", None) is not None:
        overrides["x0"], overrides["x1"] = _parse_interval(args.interval)
    if getattr(args, "weyl", None) is not None:
        overrides["weyl_modes"] = _parse_weyl(args.weyl)
    cfg = replace(cfg, **overrides)
    # fail fast on anything the modules would reject later
    CurveSpec(*cfg.curve, q=cfg.q)
    cfg.scan_spec()
    if cfg.shards < 1:
        raise ValueError("shards must be positive")
    return cfg


# ---------------------------------------------------------------------------
# Shared pipeline pieces


def _form(cfg: RunConfig) -> Eigenform:
    curve = CurveSpec(*cfg.curve, q=cfg.q)
    return load_or_build_eigenform(curve, cfg.n_max, cfg.cache_dir)


def _table_cache_path(cfg: RunConfig) -> str:
    return os.path.join(cfg.cache_dir, f"table-q{cfg.q}-tol{cfg.tol:.3g}.txt")


def _table(cfg: RunConfig, f: Eigenform) -> PeriodTable:
    """Load the period table from cache or build it; gate residuals at 10 tol."""
    path = _table_cache_path(cfg)
    if os.path.exists(path):
        table = read_table_cache(path)
        if table.q != cfg.q:
            raise CacheFormatError(f"cache {path} is for level {table.q}")
    else:
        table = build_period_table(f, cfg.tol)
    worst = max(table.residual_two, table.residual_three)
    if worst > 10.0 * cfg.tol:
        raise GateFailure(
            f"period-table relation residual {worst:.3g} exceeds 10*tol; "
            "refusing to persist or use the table"
        )
    if not os.path.exists(path):
        os.makedirs(cfg.cache_dir, exist_ok=True)
        write_table_cache(path, table)
    return table


def _store(cfg: RunConfig, table: PeriodTable) -> SymbolStore:
    return SymbolStore(table, memo_threshold=cfg.memo_threshold)


def _out(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return os.path.join(cfg.out_dir, name)


def _slope(cfg: RunConfig) -> tuple[float, float, float | None]:
    """(slope_paper, slope_real, shift source value) from the fixture."""
    l1, l1p = load_lvalue_fixture(cfg.fixture_path())
    slope_paper, slope_real = slope_from_L(cfg.q, l1)
    return slope_paper, slope_real, l1p


# ---------------------------------------------------------------------------
# Commands


def cmd_coeffs(cfg: RunConfig, args) -> int:
    f = _form(cfg)
    path = os.path.join(cfg.cache_dir, f"coeffs-q{cfg.q}-N{cfg.n_max}.txt")
    print(f"coefficient cache: {path}")
    print(f"N = {f.n_max}")
    signs = " ".join(f"e({v})={f.al_signs[v]:+d}" for v in sorted(f.al_signs))
    print(f"involution signs: {signs}")
    return EXIT_OK


def cmd_table(cfg: RunConfig, args) -> int:
    f = _form(cfg)
    table = _table(cfg, f)
    print(f"period table: {len(table.classes)} classes at tol {cfg.tol:g}")
    print(f"two-term residual:   {table.residual_two:.3e}")
    print(f"three-term residual: {table.residual_three:.3e}")
    print(f"cache: {_table_cache_path(cfg)}")
    return EXIT_OK


def cmd_symbol(cfg: RunConfig, args) -> int:
    a, c = args.a, args.c
    if c <= 0:
        raise ValueError("denominator must be positive")
    g = math.gcd(a, c)
    if g > 1:
        print(f"note: {a}/{c} reduced to {a // g}/{c // g}")
        a, c = a // g, c // g
    f = _form(cfg)
    table = _table(cfg, f)
    s = symbol(Fraction(a, c), table)
    if s.numer != a:
        print(f"note: {a}/{c} folded into [0, 1) as {s.numer}/{s.denom}")
    scaled = s.denom * math.sqrt(cfg.q / s.d)
    print(f"r = {s.numer}/{s.denom}")
    print(f"m_minus(r) = {s.m_minus:.15g}")
    print(f"m_plus(r)  = {s.m_plus:.15g}")
    print(f"d = gcd(c, q) = {s.d}")
    print(f"scaled denominator c(r) = c*sqrt(q/d) = {scaled:.15g}")
    if args.paper_sign:
        print(f"paper-sign value = i*m_minus = (0, {s.m_minus:.15g})")
    return EXIT_OK


def cmd_scan(cfg: RunConfig, args) -> int:
    f = _form(cfg)
    store = _store(cfg, _table(cfg, f))
    rows = scan(cfg.scan_spec(), store, shards=cfg.shards)
    path = _out(cfg, "aggregates.csv")
    write_aggregates_csv(path, cfg.scan_spec(), rows, cfg.fingerprint())
    decay = mean_decay_report(rows)
    print(f"{len(rows)} rows -> {path}")
    print(
        f"mean decay: max|E|sqrt(c) over ({decay.late_window[0]},{decay.late_window[1]}] "
        f"= {decay.max_late:.4g}, early median = {decay.median_early:.4g}"
    )
    return EXIT_OK


def cmd_fit(cfg: RunConfig, args) -> int:
    f = _form(cfg)
    store = _store(cfg, _table(cfg, f))
    slope_paper, slope_real, l1p = _slope(cfg)
    rows = scan(cfg.scan_spec(), store, shards=cfg.shards)
    fits = variance_fit(rows, slope_real)
    path = _out(cfg, "fit.csv")
    write_fit_csv(path, fits, cfg.fingerprint())
    l1, _ = load_lvalue_fixture(cfg.fixture_path())
    print(f"theory slope: paper {slope_paper:+.6f} / real {slope_real:+.6f}")
    for d, r in sorted(fits.items()):
        line = (
            f"d={d}: fixed-slope shift (paper) {r.fixed_slope_shift_paper:+.4f}"
            f", free slope (real) {r.slope_real:+.5f}"
            f", free shift (paper) {r.shift_paper:+.4f}"
        )
        if l1p is not None:
            line += f", theory shift {shift_value(cfg.q, d, l1, l1p):+.4f}"
        print(line)
    print(f"fit table -> {path}")
    return EXIT_OK


def cmd_dist(cfg: RunConfig, args) -> int:
    if cfg.d_filter == "all":
        raise ValueError("dist needs a single gcd class: pass --d")
    f = _form(cfg)
    store = _store(cfg, _table(cfg, f))
    _, slope_real, _ = _slope(cfg)
    rows = scan(cfg.scan_spec(), store, shards=cfg.shards)
    shift_real = variance_fit(rows, slope_real)[cfg.d_filter].fixed_slope_shift_real
    report = distribution_report(
        store,
        slope_real,
        shift_real,
        d=cfg.d_filter,
        c_min=args.c_min,
        c_max=cfg.m_max,
        x0=cfg.x0,
        x1=cfg.x1,
    )
    path = _out(cfg, "dist.csv")
    write_dist_csv(path, report, cfg.fingerprint())
    print(
        f"sample: {report.n_sample} values, d={report.d}, "
        f"c in [{report.c_min},{report.c_max}], I=[{report.x0},{report.x1})"
    )
    print(f"shift normalization uses fitted D = {shift_real:+.5f} (real)")
    for name, mts, ks in [
        ("shift-normalized", report.moments_shift, report.ks_shift),
        ("slope-normalized", report.moments_slope, report.ks_slope),
    ]:
        mtxt = " ".join(f"{m:+.4f}" for m in mts)
        print(f"{name}: moments {mtxt}; KS {ks:.4f}")
    print(f"histogram -> {path}")
    return EXIT_OK


def cmd_contig(cfg: RunConfig, args) -> int:
    f = _form(cfg)
    store = _store(cfg, _table(cfg, f))
    n_grid = args.grid
    xs = [Fraction(j, n_grid - 1) for j in range(n_grid)]
    a_m = contiguous_avg(store, cfg.m_max, xs)
    limit = ghat(f, [float(x) for x in xs])
    path = _out(cfg, "contig.csv")
    write_contig_csv(path, xs, a_m, limit, cfg.fingerprint())
    sup_dev = float(max(abs(a_m - limit)))
    sup_limit = float(max(abs(limit)))
    print(f"grid: {n_grid} points, M = {cfg.m_max}")
    print(
        f"sup|A_M - limit| = {sup_dev:.5f} ({100 * sup_dev / sup_limit:.2f}% "
        f"of sup|limit| = {sup_limit:.5f})"
    )
    print(f"profile -> {path}")
    return EXIT_OK


def cmd_weyl(cfg: RunConfig, args) -> int:
    f = _form(cfg)
    store = _store(cfg, _table(cfg, f))
    spec = cfg.scan_spec()
    rows = scan(spec, store, shards=cfg.shards)
    entries = weyl_report(spec, rows)
    path = _out(cfg, "weyl.csv")
    write_weyl_csv(path, entries, cfg.fingerprint())
    for e in entries:
        print(
            f"n={e.n}: sum = {e.total.real:+.4f}{e.total.imag:+.4f}i, "
            f"ratio = {e.ratio:.3e}"
        )
    print(f"weyl table -> {path}")
    return EXIT_OK


def cmd_theory(cfg: RunConfig, args) -> int:
    l1, l1p = load_lvalue_fixture(cfg.fixture_path())
    f = _form(cfg) if args.petersson else None
    tc = build_theory(
        cfg.q,
        l1,
        l1p,
        f=f,
        with_petersson=args.petersson,
        petersson_tol=args.petersson_tol,
    )
    print(tc.as_json())
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    """Cross-checks every internal consistency gate and emits a JSON verdict."""
    gates: list[dict] = []

    def gate(name: str, value: float, threshold: float):
        gates.append(
            {
                "name": name,
                "value": value,
                "threshold": threshold,
                "passed": bool(value <= threshold),
            }
        )

    f = _form(cfg)
    table = _table(cfg, f)
    gate("relation_two_term", table.residual_two, 2.0 * cfg.tol)
    gate("relation_three_term", table.residual_three, 3.0 * cfg.tol)

    s0 = symbol(Fraction(0, 1), table)
    l_at_1 = lfun1(f)
    gate("value_at_zero_plus", abs(s0.m_plus - l_at_1), 1e-8)
    gate("value_at_zero_minus", abs(s0.m_minus), 1e-8)

    l1, l1p = load_lvalue_fixture(cfg.fixture_path())
    norm = petersson_quadrature(f, tol=1e-5)
    recovered = sym2_l_from_petersson(f, norm.value)
    gate("fixture_sym2_recovery", abs(recovered - l1) / l1, 1e-3)

    rng = random.Random(cfg.seed)
    good_primes = [p for p in (2, 3, 5, 7, 11) if cfg.q % p][:2]
    worst = 0.0
    for k in range(20):
        c = rng.randrange(2, 200)
        a = rng.randrange(1, c)
        if math.gcd(a, c) != 1:
            continue
        p = good_primes[k % len(good_primes)]
        worst = max(worst, hecke_residual(Fraction(a, c), p, f, table))
    gate("hecke_identity", worst, 1e-8)

    worst = 0.0
    done = 0
    while done < 10:
        c = rng.randrange(2, 60)
        a = rng.randrange(1, c)
        if math.gcd(a, c) != 1:
            continue
        try:
            direct = direct_symbol_oracle(Fraction(a, c), f)
        except TruncationError:
            continue
        worst = max(worst, abs(period_sum(Fraction(a, c), table) - direct))
        done += 1
    gate("dual_algorithm", worst, 1e-8)

    if l1p is None:
        raise ValueError("verify needs a fixture with the derivative value")
    _, slope_real = slope_from_L(cfg.q, l1)
    store = _store(cfg, table)
    spec = replace(cfg, d_filter="all", k_max=2, weyl_modes=()).scan_spec()
    rows = scan(spec, store, shards=cfg.shards)
    fits = variance_fit(rows, slope_real)
    worst = 0.0
    for d, r in fits.items():
        theory_paper = shift_value(cfg.q, d, l1, l1p)
        worst = max(worst, abs(r.fixed_slope_shift_paper - theory_paper))
    gate("variance_shifts", worst, 0.05)

    verdict = {
        "q": cfg.q,
        "label": cfg.label,
        "M": cfg.m_max,
        "tol": cfg.tol,
        "seed": cfg.seed,
        "fingerprint": cfg.fingerprint(),
        "gates": gates,
        "passed": all(g["passed"] for g in gates),
    }
    print(json.dumps(verdict, indent=2))
    return EXIT_OK if verdict["passed"] else EXIT_GATE


# ---------------------------------------------------------------------------
# Argument parsing and entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--q", type=int, help="level (squarefree)")
    common.add_argument("--curve", help="a1,a2,a3,a4,a6")
    common.add_argument("--label", help="display label for the curve")
    common.add_argument("--M", type=int, help="max denominator")
    common.add_argument("--d", help="gcd class with q, or 'all'")
    common.add_argument("--interval", help="x0:x1 subinterval of [0,1)")
    common.add_argument("--k-max", dest="k_max", type=int, help="moment depth")
    common.add_argument("--weyl", help="comma-separated Weyl modes")
    common.add_argument("--tol", type=float, help="period-table tolerance")
    common.add_argument("--n-max", dest="n_max", type=int, help="coefficient count")
    common.add_argument(
        "--memo-threshold", dest="memo_threshold", type=int, help="symbol memo cap"
    )
    common.add_argument("--shards", type=int, help="scan shard count")
    common.add_argument("--seed", type=int, help="seed for sampled checks")
    common.add_argument("--cache-dir", dest="cache_dir", help="cache directory")
    common.add_argument("--fixture", help="L-value fixture path")
    common.add_argument("--out-dir", dest="out_dir", help="report directory")
    common.add_argument(
        "--paper-sign",
        dest="paper_sign",
        action="store_true",
        help="also print paper-convention values",
    )

    parser = argparse.ArgumentParser(
        prog="modsym",
        description="Modular-symbol statistics for rational elliptic curves "
        "of squarefree conductor",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("coeffs", parents=[common], help="build the coefficient cache")
    sub.add_parser("table", parents=[common], help="build the period table")
    p_symbol = sub.add_parser("symbol", parents=[common], help="evaluate one symbol")
    p_symbol.add_argument("a", type=int)
    p_symbol.add_argument("c", type=int)
    sub.add_parser("scan", parents=[common], help="moment aggregates CSV")
    sub.add_parser("fit", parents=[common], help="variance fits CSV")
    p_dist = sub.add_parser("dist", parents=[common], help="distribution report CSV")
    p_dist.add_argument("--c-min", dest="c_min", type=int, default=1)
    p_contig = sub.add_parser(
        "contig", parents=[common], help="contiguous averages CSV"
    )
    p_contig.add_argument("--grid", type=int, default=101)
    sub.add_parser("weyl", parents=[common], help="Weyl sum report CSV")
    p_theory = sub.add_parser("theory", parents=[common], help="constants as JSON")
    p_theory.add_argument("--petersson", action="store_true")
    p_theory.add_argument(
        "--petersson-tol", dest="petersson_tol", type=float, default=1e-5
    )
    sub.add_parser("verify", parents=[common], help="run every consistency gate")
    return parser


_COMMANDS = {
    "coeffs": cmd_coeffs,
    "table": cmd_table,
    "symbol": cmd_symbol,
    "scan": cmd_scan,
    "fit": cmd_fit,
    "dist": cmd_dist,
    "contig": cmd_contig,
    "weyl": cmd_weyl,
    "theory": cmd_theory,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return _COMMANDS[args.command](cfg, args)
    except GateFailure as exc:
        print(f"gate failure: {exc}", file=sys.stderr)
        return EXIT_GATE
    except (
        ValueError,
        TruncationError,
        CacheFormatError,
        ConductorError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
