"""Fibered map evaluation, frame Jacobians, cone-field partial hyperbolicity."""

from fractions import Fraction

import numpy as np
import pytest

from heislab.autos import IntMatrix, f0, hyperbolicity_certificate, identity_automorphism, induced_matrix
from heislab.fibered import ConeParams, FiberedMapSpec, fibered_map, spec_from_json, verify_partial_hyperbolicity
from heislab.heis import (
    NIL_ORIGIN,
    HeisPoint,
    LatticeElement,
    NilPoint,
    frame_distance,
    multiply,
    project_base,
    reduce,
)
from heislab.torus import Fourier2D

F0 = fibered_map(f0())


def make_nil(x, y, z) -> NilPoint:
    return reduce(HeisPoint(Fraction(x), Fraction(y), Fraction(z)))[0]


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def test_f0_fixes_origin():
    assert F0.evaluate(NIL_ORIGIN) == NIL_ORIGIN


def test_f0_printed_image():
    p = make_nil(Fraction(1, 2), Fraction(1, 2), 0)
    q = F0.evaluate(p)
    assert q.rep == HeisPoint(Fraction(1, 2), 0, Fraction(1, 8))


def test_fiber_perturbation_vanishes_over_origin_fiber():
    f = fibered_map(f0(), fiber_eps=0.1)  # fiber shift 0.1 sin(2 pi x)
    p = make_nil(0, 0, Fraction(1, 4))
    q = f.evaluate(p)
    assert project_base(q) == project_base(F0.evaluate(p))
    assert q == F0.evaluate(p)  # sin 0 = 0: no shift at all on this fiber


def test_evaluate_equivariant_across_representatives():
    f = fibered_map(f0(), base_eps=0.05, fiber_eps=0.1)
    rng = np.random.default_rng(0)
    for _ in range(20):
        g = HeisPoint(
            Fraction(int(rng.integers(-40, 40)), 16),
            Fraction(int(rng.integers(-40, 40)), 16),
            Fraction(int(rng.integers(-40, 40)), 32),
        )
        gam = LatticeElement(int(rng.integers(-4, 5)), int(rng.integers(-4, 5)), int(rng.integers(-4, 5)))
        assert reduce(f.raw_apply(multiply(g, gam.to_heis())))[0] == reduce(f.raw_apply(g))[0]


def test_too_large_base_perturbation_rejected():
    with pytest.raises(ValueError):
        fibered_map(f0(), base_eps=8.0)


def test_induced_base_map_commutes_with_projection():
    f = fibered_map(f0(), base_eps=0.05, fiber_eps=0.1)
    base = f.induced_base_map()
    rng = np.random.default_rng(1)
    for _ in range(40):
        p = make_nil(
            Fraction(int(rng.integers(0, 16)), 16),
            Fraction(int(rng.integers(0, 16)), 16),
            Fraction(int(rng.integers(0, 8)), 16),
        )
        q = f.evaluate(p)
        bx, by = base(float(p.rep.x), float(p.rep.y))
        assert abs(float(q.rep.x) - float(bx)) < 1e-12
        assert abs(float(q.rep.y) - float(by)) < 1e-12


def test_induced_base_map_of_f0_is_linear():
    base = F0.induced_base_map()
    assert base.is_linear
    assert induced_matrix(base) == IntMatrix([[2, 1], [1, 1]])


def test_inverse_spec_round_trip():
    f = fibered_map(f0(), fiber_eps=0.1)
    finv = f.inverse()
    rng = np.random.default_rng(2)
    for _ in range(20):
        p = make_nil(
            Fraction(int(rng.integers(0, 32)), 32),
            Fraction(int(rng.integers(0, 32)), 32),
            Fraction(int(rng.integers(0, 16)), 32),
        )
        assert frame_distance(finv.evaluate(f.evaluate(p)), p) < 1e-12
        assert frame_distance(f.evaluate(finv.evaluate(p)), p) < 1e-12


# ---------------------------------------------------------------------------
# frame Jacobian vs finite differences
# ---------------------------------------------------------------------------


def frame_jacobian_fd(f: FiberedMapSpec, p: NilPoint, h: float = 1e-6) -> np.ndarray:
    """Central differences along the frame directions, expressed in the frame."""

    def as_floats(n: NilPoint):
        return np.array([float(n.rep.x), float(n.rep.y), float(n.rep.z)])

    x0 = as_floats(p)
    frame_cols = np.array([[1, 0, 0], [0, 1, 0], [0, float(x0[0]), 1]], dtype=float).T
    # frame at the raw (unreduced) image representative: the frame field does
    # not descend through lattice translations, so the lift convention matters
    xF = _apply_float(f, x0)[0]
    Linv = np.array([[1, 0, 0], [0, 1, 0], [0, -xF, 1]], dtype=float)

    cols = []
    for k in range(3):
        d = frame_cols[k]  # column of L(p): the k-th frame vector at p
        plus = _apply_float(f, x0 + h * d)
        minus = _apply_float(f, x0 - h * d)
        diff = (plus - minus) / (2 * h)
        cols.append(Linv @ diff)
    return np.stack(cols, axis=1)


def _apply_float(f: FiberedMapSpec, coords: np.ndarray) -> np.ndarray:
    """Float lift of the raw formula, unreduced (reduction kills differences)."""
    (a, b), (c, d) = f.core.M.rows
    alpha, beta, gamma = (float(q) for q in f.core.quad)
    x, y, z = coords
    X = a * x + b * y
    Y = c * x + d * y
    Z = float(f.core.e) * z + alpha * x * x + beta * y * y + gamma * x * y \
        + f.core.r2 / 2.0 * x + f.core.s2 / 2.0 * y
    u = f.base(x, y)
    uf = f.fiber(x, y)
    return np.array([X + u[0], Y + u[1], Z + uf[0] + u[0] * Y])


def test_jacobian_f0_constant():
    expected = np.array([[2.0, 1, 0], [1, 1, 0], [0, 0, 1]])
    rng = np.random.default_rng(3)
    for _ in range(10):
        p = make_nil(
            Fraction(int(rng.integers(0, 64)), 64),
            Fraction(int(rng.integers(0, 64)), 64),
            Fraction(int(rng.integers(0, 32)), 64),
        )
        J = F0.jacobian_frame(p)
        assert np.abs(J - expected).max() < 1e-14
        assert np.abs(frame_jacobian_fd(F0, p) - expected).max() < 1e-8


def test_jacobian_identity_map():
    ident = fibered_map(identity_automorphism())
    p = make_nil(Fraction(1, 3), Fraction(1, 5), Fraction(1, 7))
    assert np.abs(ident.jacobian_frame(p) - np.eye(3)).max() < 1e-14


def test_jacobian_fd_agreement_perturbed():
    f = fibered_map(f0(), base_eps=0.05, fiber_eps=0.1)
    rng = np.random.default_rng(4)
    for _ in range(10):
        p = make_nil(
            Fraction(int(rng.integers(0, 64)), 64),
            Fraction(int(rng.integers(0, 64)), 64),
            Fraction(int(rng.integers(0, 32)), 64),
        )
        J = f.jacobian_frame(p)
        Jfd = frame_jacobian_fd(f, p)
        assert np.abs(J - Jfd).max() < 1e-6
        # fiber column reflects fiber preservation
        assert np.abs(J[:, 2] - np.array([0, 0, 1.0])).max() < 1e-14


def test_jacobian_fd_convergence_order():
    f = fibered_map(f0(), base_eps=0.05, fiber_eps=0.1)
    p = make_nil(Fraction(3, 8), Fraction(5, 8), Fraction(1, 8))
    J = f.jacobian_frame(p)
    errs = []
    for h in (1e-3, 1e-4, 1e-5):
        errs.append(np.abs(frame_jacobian_fd(f, p, h=h) - J).max())
    slopes = np.diff(np.log(errs)) / np.diff(np.log([1e-3, 1e-4, 1e-5]))
    assert slopes[0] >= 1.9  # central differences are O(h^2)


def test_jacobian_z_independent():
    f = fibered_map(f0(), base_eps=0.05, fiber_eps=0.1)
    J1 = f.jacobian_frame(make_nil(Fraction(1, 3), Fraction(1, 5), 0))
    J2 = f.jacobian_frame(make_nil(Fraction(1, 3), Fraction(1, 5), Fraction(2, 5)))
    assert np.array_equal(J1, J2)


# ---------------------------------------------------------------------------
# partial hyperbolicity
# ---------------------------------------------------------------------------


def test_ph_f0_passes_with_stated_rates():
    # the reference aperture-20 cones around the eigendirection lifts
    cones20 = ConeParams(aperture_unstable=np.deg2rad(20), aperture_stable=np.deg2rad(20))
    for cones in (cones20, ConeParams()):
        report = verify_partial_hyperbolicity(F0, cones, grid_n=8)
        assert report.passed
        assert report.unstable_expansion_min >= 2.2
        assert report.stable_contraction_max <= 0.45
        assert report.center_rate_min == report.center_rate_max == 1.0


def test_ph_identity_fails():
    ident = fibered_map(identity_automorphism())
    report = verify_partial_hyperbolicity(ident, ConeParams(), grid_n=8)
    assert not report.passed
    assert report.unstable_expansion_min <= 1.0


def test_ph_fiber_shear_keeps_center_rate():
    # the shear is unipotent in the fiber block: base rates survive, the
    # invariant bundle tilts into the fiber, so the default cones are wider
    f = fibered_map(f0(), fiber_eps=0.05)
    report = verify_partial_hyperbolicity(f, ConeParams(), grid_n=8)
    assert report.passed
    assert report.center_rate_min == report.center_rate_max == 1.0
    assert report.unstable_expansion_min >= 2.2
    assert report.stable_contraction_max <= 0.45


def test_ph_full_perturbation_passes():
    f = fibered_map(f0(), base_eps=0.05, fiber_eps=0.05)
    report = verify_partial_hyperbolicity(f, ConeParams(), grid_n=8)
    assert report.passed


def test_ph_monotone_in_aperture():
    # monotonicity holds when the cone axes are the invariant directions
    # (for f0 they are); a narrower cone around them still certifies
    wide = verify_partial_hyperbolicity(F0, ConeParams(), grid_n=8)
    narrow = verify_partial_hyperbolicity(
        F0, ConeParams(aperture_unstable=np.deg2rad(10), aperture_stable=np.deg2rad(10)), grid_n=8
    )
    assert wide.passed
    assert narrow.passed


def test_ph_grid_floor():
    with pytest.raises(ValueError):
        verify_partial_hyperbolicity(F0, ConeParams(), grid_n=4)


def test_cone_aperture_validation():
    with pytest.raises(ValueError):
        ConeParams(aperture_unstable=2.0)


def test_spec_json_round_trip():
    f = fibered_map(f0(), base_eps=0.05, fiber_eps=0.1)
    obj = {"core": {"M": [[2, 1], [1, 1]], "r2": 0, "s2": 0}, "base_eps": 0.05, "fiber_eps": 0.1}
    f2 = spec_from_json(obj)
    p = make_nil(Fraction(3, 16), Fraction(5, 16), Fraction(1, 16))
    assert f2.evaluate(p) == f.evaluate(p)
