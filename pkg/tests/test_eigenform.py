"""Coefficient pipeline: point counts, Hecke recursions, truncation, L-value.

Frozen oracles: the prime traces and first dozen coefficients of 15.a1 were
computed by hand (projective point counts and the recursions); the
antiderivative reference value comes from a 200-term mpmath evaluation at
50 digits.
"""
import math
import random

import numpy as np
import pytest

from modsym.eigenform import (
    CacheFormatError,
    ConductorError,
    CurveSpec,
    Eigenform,
    TOL_FLOOR,
    TruncationError,
    TruncationPlan,
    al_sign,
    antiderivative_F,
    antiderivative_batch,
    build_eigenform,
    count_points,
    form_values,
    hecke_extend,
    lfun1,
    load_or_build_eigenform,
    read_coeffs_cache,
    tail_bound,
    terms_needed,
    write_coeffs_cache,
)

CURVE_15A1 = (1, 1, 1, -10, -10)

# hand-computed prime traces for 15.a1
TRACES_15A1 = {2: -1, 3: -1, 5: 1, 7: 0, 11: -4, 13: -2}

# hand-computed a(1) .. a(12) via the recursions
FIRST_COEFFS_15A1 = [1, -1, -1, -1, 1, 1, 0, 3, 1, -1, -4, 1]


# ---------------------------------------------------------------------------
# model validation


def test_curvespec_discriminant():
    spec = CurveSpec(*CURVE_15A1, q=15)
    assert spec.discriminant == 50625  # 3^4 * 5^4


def test_curvespec_rejects_non_squarefree_level():
    with pytest.raises(ValueError):
        CurveSpec(*CURVE_15A1, q=9)


def test_curvespec_rejects_level_not_dividing_discriminant():
    with pytest.raises(ValueError):
        CurveSpec(*CURVE_15A1, q=7)


def test_curvespec_rejects_level_one():
    with pytest.raises(ValueError):
        CurveSpec(0, 0, 0, 1, 1, q=1)


# ---------------------------------------------------------------------------
# point counts


@pytest.mark.parametrize("p,expected", sorted(TRACES_15A1.items()))
def test_count_points_15a1_traces(p, expected):
    assert count_points(CurveSpec(*CURVE_15A1, q=15), p) == expected


def test_count_points_independent_curve():
    # y^2 = x^3 + x + 1 over F_5: 8 affine points by direct enumeration,
    # so the trace is 5 + 1 - 9 = -3.
    spec = CurveSpec(0, 0, 0, 1, 1, q=31)
    assert count_points(spec, 5) == -3


def test_count_points_enumeration_matches_character_sum():
    # p = 2, 3 use brute-force enumeration, p > 3 the character sum; check
    # the two styles agree through an independent brute force at p = 7, 11.
    spec = CurveSpec(*CURVE_15A1, q=15)
    for p in (7, 11):
        n_affine = 0
        for x in range(p):
            for y in range(p):
                lhs = (y * y + spec.a1 * x * y + spec.a3 * y) % p
                rhs = (x ** 3 + spec.a2 * x * x + spec.a4 * x + spec.a6) % p
                if lhs == rhs:
                    n_affine += 1
        assert count_points(spec, p) == p + 1 - (n_affine + 1)


def test_count_points_rejects_bad_p():
    with pytest.raises(ValueError):
        count_points(CurveSpec(*CURVE_15A1, q=15), 1)


# ---------------------------------------------------------------------------
# Hecke recursions


def test_hecke_extend_first_dozen():
    a = hecke_extend(TRACES_15A1, 15, 12)
    assert list(a[1:]) == FIRST_COEFFS_15A1


def test_hecke_extend_multiplicativity(form15):
    rng = random.Random(5)
    a = form15.coeffs
    for _ in range(200):
        m = rng.randrange(2, 300)
        n = rng.randrange(2, 300)
        if math.gcd(m, n) != 1:
            continue
        assert a[m * n] == a[m] * a[n]


def test_hecke_extend_good_prime_power_recursion(form15):
    a = form15.coeffs
    for p in (2, 7, 13):
        for k in range(1, 5):
            if p ** (k + 1) > form15.n_max:
                break
            assert a[p ** (k + 1)] == a[p] * a[p ** k] - p * a[p ** (k - 1)]


def test_hecke_extend_bad_prime_powers(form15):
    a = form15.coeffs
    for k in range(1, 6):
        assert a[3 ** k] == (-1) ** k
        assert a[5 ** k] == 1


def test_hasse_bound(form15):
    spec = CurveSpec(*CURVE_15A1, q=15)
    for p in (17, 19, 101, 997):
        t = count_points(spec, p)
        assert t * t <= 4 * p
        assert form15.coeffs[p] == t


def test_build_eigenform_conductor_mismatch():
    # y^2 = x^3 - x has additive reduction at 2 (trace 0), so declaring
    # level 2 must be refused.
    with pytest.raises(ConductorError):
        build_eigenform(CurveSpec(0, 0, 0, -1, 0, q=2), n_max=50)


def test_al_sign_multiplicative(form15):
    assert form15.al_signs == {3: 1, 5: -1}
    assert al_sign(form15, 1) == 1
    assert al_sign(form15, 3) == 1
    assert al_sign(form15, 5) == -1
    assert al_sign(form15, 15) == -1
    with pytest.raises(ValueError):
        al_sign(form15, 2)


# ---------------------------------------------------------------------------
# certified truncation


def test_tail_bound_monotone():
    ys = [0.05, 0.2, 1.0]
    for y in ys:
        vals = [tail_bound(n, y) for n in (1, 2, 4, 8, 16)]
        assert all(a > b for a, b in zip(vals, vals[1:]))


def test_terms_needed_is_minimal():
    for y, tol in [(0.1, 1e-10), (0.5, 1e-12), (2.0, 1e-8)]:
        n = terms_needed(y, tol)
        assert tail_bound(n, y) < tol
        assert n == 1 or tail_bound(n - 1, y) >= tol


def test_terms_needed_validation():
    with pytest.raises(ValueError):
        terms_needed(0.0, 1e-10)
    with pytest.raises(TruncationError):
        terms_needed(1.0, TOL_FLOOR / 10)


def test_truncation_plan_refuses_short_store():
    with pytest.raises(TruncationError):
        TruncationPlan(tol=1e-12, y_min=1e-4, n_cap=1000)


def test_truncation_plan_height_guard():
    plan = TruncationPlan(tol=1e-10, y_min=0.5, n_cap=10000)
    with pytest.raises(ValueError):
        plan.terms(0.4)
    assert plan.terms(1.0) <= plan.terms(0.5)


# ---------------------------------------------------------------------------
# series evaluation


def test_antiderivative_reference_value(form15):
    # 200-term reference at z = i computed with mpmath at 50 digits; the
    # dropped tail there is below e^(-2 pi 200).
    import mpmath

    mpmath.mp.dps = 50
    ref = mpmath.mpc(0)
    for n in range(1, 201):
        an = int(form15.coeffs[n])
        ref += an / (2j * mpmath.pi * n) * mpmath.e ** (-2 * mpmath.pi * n)
    plan = TruncationPlan(tol=1e-13, y_min=1.0, n_cap=form15.n_max)
    got = antiderivative_F(form15, 1j, plan)
    assert abs(got - complex(ref)) < 1e-12


def test_antiderivative_periodicity(form15):
    plan = TruncationPlan(tol=1e-12, y_min=0.3, n_cap=form15.n_max)
    zs = np.array([0.17 + 0.4j, -0.6 + 1.1j])
    a = antiderivative_batch(form15, zs, plan)
    b = antiderivative_batch(form15, zs + 1.0, plan)
    assert np.max(np.abs(a - b)) < 5e-12


def test_form_values_matches_direct_sum(form15):
    z = 0.3 + 0.8j
    n_terms = 400  # tail at y = 0.8 is far below the comparison tolerance
    direct = sum(
        int(form15.coeffs[n]) * np.exp(2j * np.pi * n * z) for n in range(1, n_terms)
    )
    got = form_values(form15, [z], tol=1e-12)[0]
    assert abs(got - direct) < 1e-12


def test_form_values_refuses_without_coefficients(form15_small):
    with pytest.raises(TruncationError):
        form_values(form15_small, [0.1 + 1e-3j], tol=1e-10)


# ---------------------------------------------------------------------------
# central L-value


def test_lfun1_frozen(form15):
    assert lfun1(form15) == pytest.approx(0.350150760583576, abs=1e-12)


def test_lfun1_tolerance_refusal():
    # a two-coefficient store with functional sign -1 cannot meet any
    # practical tolerance, so the evaluation must refuse rather than guess
    f = Eigenform(15, np.array([0, 1]), {3: 1, 5: -1})
    with pytest.raises(TruncationError):
        lfun1(f, tol=1e-12)


def test_lfun1_vanishes_for_positive_sign():
    # synthetic form whose product of involution signs is +1: the sign-folded
    # series prefactor (1 - e) kills the value identically
    f = Eigenform(15, np.array([0, 1, -1]), {3: 1, 5: 1})
    assert lfun1(f) == 0.0


# ---------------------------------------------------------------------------
# coefficient cache


def test_coeffs_cache_round_trip(tmp_path, form15_small):
    path = tmp_path / "coeffs.txt"
    write_coeffs_cache(str(path), form15_small)
    q, coeffs = read_coeffs_cache(str(path))
    assert q == 15
    assert np.array_equal(coeffs, form15_small.coeffs)


def test_coeffs_cache_idempotent(tmp_path, form15_small):
    p1 = tmp_path / "a.txt"
    p2 = tmp_path / "b.txt"
    write_coeffs_cache(str(p1), form15_small)
    write_coeffs_cache(str(p2), form15_small)
    assert p1.read_bytes() == p2.read_bytes()


def test_coeffs_cache_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("not a cache header\n1 1\n")
    with pytest.raises(CacheFormatError):
        read_coeffs_cache(str(path))


def test_coeffs_cache_rejects_truncated_body(tmp_path, form15_small):
    path = tmp_path / "short.txt"
    write_coeffs_cache(str(path), form15_small)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-5]) + "\n")
    with pytest.raises(CacheFormatError):
        read_coeffs_cache(str(path))


def test_load_or_build_rebuilds_corrupt_cache(tmp_path, caplog):
    spec = CurveSpec(*CURVE_15A1, q=15)
    cache_dir = tmp_path / "cache"
    f1 = load_or_build_eigenform(spec, 50, str(cache_dir))
    cache_file = cache_dir / "coeffs-q15-N50.txt"
    assert cache_file.exists()
    cache_file.write_text("garbage header\n")
    with caplog.at_level("WARNING"):
        f2 = load_or_build_eigenform(spec, 50, str(cache_dir))
    assert "rebuilding" in caplog.text
    assert np.array_equal(f1.coeffs, f2.coeffs)


def test_load_or_build_uses_cache(tmp_path):
    spec = CurveSpec(*CURVE_15A1, q=15)
    cache_dir = tmp_path / "cache"
    f1 = load_or_build_eigenform(spec, 60, str(cache_dir))
    f2 = load_or_build_eigenform(spec, 60, str(cache_dir))
    assert np.array_equal(f1.coeffs, f2.coeffs)
    assert f2.al_signs == {3: 1, 5: -1}
