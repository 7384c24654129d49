"""Smith normal form, Lefschetz counts, exact enumeration, Newton refinement."""

import random
from fractions import Fraction

import numpy as np
import pytest

from heislab.autos import IntMatrix, hyperbolicity_certificate
from heislab.conjugacy import solve_semiconjugacy
from heislab.errors import CountMismatch, SingularAtM
from heislab.periodic import (
    counts_by_trace_recursion,
    eigenvalue_count,
    enumerate_fixed_points,
    lefschetz_number,
    lefschetz_report,
    orbit_partition,
    refine_periodic_points,
    smith_normal_form,
)
from heislab.torus import identity_field, linear_torus_map, perturbed_torus_map

A = IntMatrix([[2, 1], [1, 1]])
CERT = hyperbolicity_certificate(A)


# ---------------------------------------------------------------------------
# Smith normal form
# ---------------------------------------------------------------------------


def test_snf_identity():
    snf = smith_normal_form(IntMatrix.identity(3))
    assert snf.D == IntMatrix.identity(3)


def test_snf_printed_examples():
    # A - I for the cat-like matrix: unimodular, trivial cokernel
    snf1 = smith_normal_form(IntMatrix([[1, 1], [1, 0]]))
    assert snf1.diagonal == (1, 1)
    # A^2 - I: det -5, gcd of entries 1
    snf2 = smith_normal_form(IntMatrix([[4, 3], [3, 1]]))
    assert snf2.diagonal == (1, 5)


def test_snf_randomized_reconstruction():
    rng = random.Random(0)
    for _ in range(120):
        n = rng.choice([2, 2, 3])
        M = IntMatrix([[rng.randint(-9, 9) for _ in range(n)] for _ in range(n)])
        snf = smith_normal_form(M)  # internal exactness checks run here
        d = snf.diagonal
        assert all(x >= 0 for x in d)
        for i in range(n - 1):
            if d[i] != 0:
                assert d[i + 1] % d[i] == 0
        assert abs(M.det()) == abs(snf.D.det())


def test_snf_zero_and_diagonal():
    snf = smith_normal_form(IntMatrix([[0, 0], [0, 0]]))
    assert snf.diagonal == (0, 0)
    snf2 = smith_normal_form(IntMatrix([[6, 0], [0, 4]]))
    assert snf2.diagonal == (2, 12)


# ---------------------------------------------------------------------------
# Lefschetz numbers and exact counts
# ---------------------------------------------------------------------------


def test_lefschetz_values():
    assert lefschetz_number(A, 1) == -1
    assert lefschetz_number(A, 2) == -5
    assert lefschetz_number(IntMatrix.identity(2), 5) == 0


def test_counting_identity_m_1_to_8():
    counts_rec = counts_by_trace_recursion(A, 8)
    assert counts_rec[:5] == [1, 5, 16, 45, 121]
    for m in range(1, 9):
        pts = enumerate_fixed_points(A, m)
        L = lefschetz_number(A, m)
        assert len(pts) == abs(L) == counts_rec[m - 1]
        ev = eigenvalue_count(CERT, m)
        assert round(ev) == abs(L)
        assert abs(ev - abs(L)) < 1e-6 * abs(L)


def test_enumerate_m1_origin_only():
    pts = enumerate_fixed_points(A, 1)
    assert len(pts) == 1
    assert (pts[0].u, pts[0].v) == (0, 0)


def test_enumerate_m2_five_points_exact():
    pts = enumerate_fixed_points(A, 2)
    assert len(pts) == 5
    assert any(p.u == 0 and p.v == 0 for p in pts)
    A2 = A.power(2)
    for p in pts:
        img = A2.apply_fraction((p.u, p.v))
        assert (img[0] - p.u).denominator == 1
        assert (img[1] - p.v).denominator == 1


def test_enumerate_m3_count_16_and_orbits():
    pts = enumerate_fixed_points(A, 3)
    assert len(pts) == 16
    orbits = orbit_partition(A, 3)
    sizes = sorted(len(o) for o in orbits)
    assert sizes == [1] + [3] * 5  # fixed point plus five 3-cycles


def test_singular_at_m():
    with pytest.raises(SingularAtM):
        enumerate_fixed_points(IntMatrix.identity(2), 1)


def test_every_hyperbolic_sample_has_fixed_point():
    rng = random.Random(1)
    found = 0
    while found < 25:
        M = IntMatrix([[rng.randint(-4, 4) for _ in range(2)] for _ in range(2)])
        if M.det() != 1 or abs(M.trace()) < 3:
            continue
        found += 1
        assert len(enumerate_fixed_points(M, 1)) >= 1


def test_lefschetz_report_json():
    rep = lefschetz_report(A, CERT, 2)
    js = rep.to_json()
    assert js["m"] == 2 and js["lefschetz"] == -5 and js["count"] == 5
    assert ["0/1", "0/1"] in js["points"]


# ---------------------------------------------------------------------------
# Newton refinement through the conjugacy
# ---------------------------------------------------------------------------


def test_refine_linear_recovers_snf_points():
    f = linear_torus_map(A)
    h = identity_field(64)
    for m in (1, 2, 3):
        pts = refine_periodic_points(f, A, h, m)
        exact = np.array([[float(p.u), float(p.v)] for p in enumerate_fixed_points(A, m)])
        assert pts.shape == exact.shape
        assert np.abs(pts - exact).max() < 1e-12


def test_refine_perturbed_counts_and_residuals():
    eps = 0.05
    f = perturbed_torus_map(A, eps)
    h, _ = solve_semiconjugacy(f, A, CERT, N=128, tol=1e-10)
    for m, expected in [(1, 1), (2, 5), (3, 16), (4, 45)]:
        pts = refine_periodic_points(f, A, h, m)
        assert len(pts) == expected
        # residuals: f^m(x) = x to 1e-12
        for w in pts:
            x, y = np.array([w[0]]), np.array([w[1]])
            for _ in range(m):
                x, y = f(x, y)
            dx = abs(x[0] - w[0]) % 1.0
            dy = abs(y[0] - w[1]) % 1.0
            assert min(dx, 1 - dx) < 1e-11
            assert min(dy, 1 - dy) < 1e-11
        # each point sits near its linear seed
        exact = np.array([[float(p.u), float(p.v)] for p in enumerate_fixed_points(A, m)])
        for w in pts:
            d = np.sqrt(((exact - w + 0.5) % 1.0 - 0.5) ** 2).sum(axis=1).min()
            assert d < 5 * eps


def test_refine_count_mismatch_detected():
    # a conjugacy field that collapses everything to nearly one point makes
    # Newton lose seeds; the mismatch must be reported with diagnostics
    f = perturbed_torus_map(A, 0.05)
    n = 32
    grid = np.zeros((n, n, 2))
    h_bad = identity_field(n)
    with pytest.raises(CountMismatch) as exc_info:
        # m=4 with a much-too-small search cap: sup|u| = 0 forces cap 1e-6,
        # but perturbed points sit O(eps) away from the seeds
        refine_periodic_points(f, A, h_bad, 4)
    err = exc_info.value
    assert err.expected == 45
    assert err.found < err.expected
    assert "lost_seeds" in err.diagnostics
