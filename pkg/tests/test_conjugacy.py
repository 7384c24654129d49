"""Conjugacy solver: exact case, perturbed case, defect, uniqueness, injectivity."""

import numpy as np
import pytest

from heislab.autos import IntMatrix, hyperbolicity_certificate
from heislab.conjugacy import (
    conjugacy_defect,
    injectivity_probe,
    orbit_push_error,
    solve_semiconjugacy,
)
from heislab.errors import DegreeMismatch, NotHyperbolic
from heislab.torus import (
    DisplacementField,
    TorusMap,
    identity_field,
    linear_torus_map,
    perturbed_torus_map,
)

A = IntMatrix([[2, 1], [1, 1]])
CERT = hyperbolicity_certificate(A)
LAM_S = CERT.lam_stable  # = 1/lam_u ~ 0.381966


def test_exact_linear_case_gives_zero_field():
    f = linear_torus_map(A)
    h, report = solve_semiconjugacy(f, A, CERT, N=64, tol=1e-12)
    assert h.sup == 0.0
    assert report.defect == 0.0
    assert report.injectivity_margin == pytest.approx(1.0, abs=1e-9)


def test_perturbed_case_converges_geometrically():
    f = perturbed_torus_map(A, 0.05)
    h, report = solve_semiconjugacy(f, A, CERT, N=128, tol=1e-10)
    assert report.final_change < 1e-10
    # dominant contraction factor max(lam_s, 1/lam_u) = 0.382
    assert abs(report.rate - LAM_S) < 0.05
    assert report.injectivity_margin > 0
    assert 0.005 < report.sup_u < 0.05
    # convergence slope bound: log-change decreases at least like log(rate)+0.05
    ch = report.changes
    mid = ch[1 : len(ch) - 2]
    ratios = [b / a for a, b in zip(mid, mid[1:])]
    assert np.median(ratios) <= LAM_S + 0.05


def test_basepoint_fixed():
    f = perturbed_torus_map(A, 0.05)
    h, _ = solve_semiconjugacy(f, A, CERT, N=128, tol=1e-10)
    # the origin is a fixed point of f, so u(0,0) = 0 survives the iteration
    assert np.hypot(*h.grid[0, 0]) < 1e-9


def test_winding_is_identity():
    f = perturbed_torus_map(A, 0.05)
    h, _ = solve_semiconjugacy(f, A, CERT, N=64, tol=1e-9)
    x = np.array([0.3])
    y = np.array([0.4])
    hx0, hy0 = h.h(x, y)
    hx1, hy1 = h.h(x + 1, y)
    assert np.allclose([hx1 - hx0, hy1 - hy0], [[1.0], [0.0]], atol=1e-9)


def test_defect_magnitude_and_self_consistency():
    # representation-limited defect: the conjugacy is only Holder, so a
    # 128-grid bicubic field carries an irreducible high-frequency error;
    # the fine-grid defect sits orders above the iteration tolerance
    f = perturbed_torus_map(A, 0.05)
    h, report = solve_semiconjugacy(f, A, CERT, N=128, tol=1e-10)
    assert report.defect < 2e-3
    assert report.defect == pytest.approx(conjugacy_defect(h, f, A, 512), rel=1e-12)


def test_defect_scales_with_eps():
    sups, defects = [], []
    for eps in (0.04, 0.02, 0.01):
        f = perturbed_torus_map(A, eps)
        h, report = solve_semiconjugacy(f, A, CERT, N=64, tol=1e-10)
        sups.append(h.sup)
        defects.append(report.defect)
    # first-order response: sup|u| proportional to eps within 20%
    assert abs(sups[0] / sups[1] - 2.0) < 0.4
    assert abs(sups[1] / sups[2] - 2.0) < 0.4
    assert defects[0] > defects[2]


def test_uniqueness_from_other_seed():
    f = perturbed_torus_map(A, 0.05)
    tol = 1e-10
    h0, _ = solve_semiconjugacy(f, A, CERT, N=64, tol=tol)
    rng = np.random.default_rng(11)
    init = 0.05 * rng.standard_normal((64, 64, 2))
    h1, _ = solve_semiconjugacy(f, A, CERT, N=64, tol=tol, initial=init)
    assert np.abs(h0.grid - h1.grid).max() < 10 * tol


def test_defect_identity_field_linear_map():
    h = identity_field(64)
    assert conjugacy_defect(h, linear_torus_map(A), A, 128) == 0.0


def test_defect_identity_field_perturbed_map():
    # h = id leaves exactly the periodic part: sup |p| = eps/(2 pi) * sqrt(max ...)
    eps = 0.05
    f = perturbed_torus_map(A, eps)
    d = conjugacy_defect(identity_field(64), f, A, 256)
    # modes peak together at x = y = 1/4: |(sin, sin)| = sqrt(2) * eps/(2pi)
    expected = np.sqrt(2) * eps / (2 * np.pi)
    assert abs(d - expected) / expected < 0.1


def test_degree_mismatch_raises():
    f = linear_torus_map(IntMatrix([[1, 1], [1, 0]]))
    with pytest.raises(DegreeMismatch):
        solve_semiconjugacy(f, A, CERT, N=64)


def test_not_hyperbolic_raises():
    P = IntMatrix([[1, 1], [0, 1]])
    cert_p = hyperbolicity_certificate(P)
    with pytest.raises(NotHyperbolic):
        solve_semiconjugacy(linear_torus_map(P), P, cert_p, N=64)


def test_bad_grid_size_rejected():
    with pytest.raises(ValueError):
        solve_semiconjugacy(linear_torus_map(A), A, CERT, N=100)


def test_injectivity_probe_identity():
    assert injectivity_probe(identity_field(32)) == pytest.approx(1.0, abs=1e-9)


def test_injectivity_probe_collapse_detected():
    # fold the map on a patch: u = -1.5 x on a block of cells
    n = 32
    grid = np.zeros((n, n, 2))
    ii = np.arange(n) / n
    for i in range(4, 12):
        grid[i, :, 0] = -1.5 * (ii[i] - ii[4])
    h = DisplacementField(grid)
    assert injectivity_probe(h) <= 0.0


def test_orbit_push_error_envelope():
    # one-step defects are amplified by A along the unstable direction, so
    # the correct orbit-level envelope is the geometric sum
    # defect * (lam_u^k - 1)/(lam_u - 1), saturating at the torus diameter
    f = perturbed_torus_map(A, 0.05)
    h, report = solve_semiconjugacy(f, A, CERT, N=128, tol=1e-10)
    rng = np.random.default_rng(12)
    x0 = rng.random((200, 2))
    steps = 12
    errs = orbit_push_error(h, f, A, x0, steps=steps)
    lam_u = CERT.lam
    k = np.arange(steps + 1)
    envelope = np.minimum(report.defect * (lam_u**k - 1) / (lam_u - 1) * 2.0, np.sqrt(2) / 2)
    assert errs[0] < 1e-12
    assert (errs <= envelope + 1e-12).all()
    # growth really is super-linear: the spec-style linear bound fails early
    assert errs[8] > 8 * report.defect
