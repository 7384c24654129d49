"""Fibered maps on the nilmanifold: automorphism cores with periodic perturbations.

A fibered map applies the core automorphism and then left-multiplies by the
base-dependent group element (u1, u2, uf)(x, y).  Left multiplication is
what descends to the quotient: right translation by a lattice element mixes
x into z, so naive coordinate-wise addition of a base perturbation would
not be well defined on the manifold.  Consequences:

  base dynamics      (x, y) -> M (x, y) + (u1, u2)(x, y)
  fiber coordinate   z -> e z + quad(x, y) + uf(x, y) + u1(x, y) * (cx + dy)

Perturbations are truncated Fourier series, so periodicity and derivatives
are exact.  The base amplitude convention folds in a 1/(2 pi) factor; the
fiber amplitude does not (matching the reference examples eps*(sin)/(2pi)
on the base and eps*sin on the fiber).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .autos import HeisAutomorphism, IntMatrix, abelianization, apply, invert_automorphism
from .errors import NotEquivariant
from .heis import HeisPoint, LatticeElement, NilPoint, frame_distance, multiply, reduce
from .torus import TWO_PI, Fourier2D, TorusMap


@dataclass
class FiberedMapSpec:
    """Core automorphism plus Z^2-periodic base and fiber perturbations."""

    core: HeisAutomorphism
    base: Fourier2D = None   # 2-component displacement added to the base image
    fiber: Fourier2D = None  # scalar shift added to the fiber coordinate
    jacobian_floor: float = 0.1
    _checked: bool = field(default=False, repr=False)

    def __post_init__(self):
        if self.base is None:
            self.base = Fourier2D.zero(2)
        if self.fiber is None:
            self.fiber = Fourier2D.zero(1)
        if self.base.dim != 2 or self.fiber.dim != 1:
            raise ValueError("base perturbation needs 2 components, fiber 1")
        self._validate()

    @property
    def is_pure_automorphism(self) -> bool:
        return self.base.is_zero and self.fiber.is_zero

    def _validate(self):
        # base map must stay a diffeomorphism: Jacobian determinant bounded
        # away from zero on a grid
        base_map = self.induced_base_map()
        ii = np.arange(32) / 32
        gx, gy = np.meshgrid(ii, ii, indexing="ij")
        J = base_map.jacobian(gx, gy)
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        if np.abs(det).min() < self.jacobian_floor or det.min() * det.max() < 0:
            raise ValueError(
                f"base perturbation too large: det DJ in [{det.min():.3f}, {det.max():.3f}]"
            )
        # deck-transformation invariance of the raw formula (exact)
        rng = np.random.default_rng(0)
        for _ in range(5):
            g = HeisPoint(
                Fraction(int(rng.integers(-20, 20)), 8),
                Fraction(int(rng.integers(-20, 20)), 8),
                Fraction(int(rng.integers(-20, 20)), 16),
            )
            gam = LatticeElement(
                int(rng.integers(-3, 4)), int(rng.integers(-3, 4)), int(rng.integers(-3, 4))
            )
            lhs = reduce(self.raw_apply(multiply(g, gam.to_heis())))[0]
            rhs = reduce(self.raw_apply(g))[0]
            if lhs != rhs:
                raise NotEquivariant(f"formula not coset-invariant at {g}, {gam}")
        self._checked = True

    def perturbation_element(self, x: Fraction, y: Fraction) -> HeisPoint:
        """The left-translation element (u1, u2, uf) at reduced base coords."""
        if self.is_pure_automorphism:
            return HeisPoint(Fraction(0), Fraction(0), Fraction(0))
        xf, yf = float(x), float(y)
        ub = self.base(xf, yf)
        uf = self.fiber(xf, yf)
        return HeisPoint(Fraction(float(ub[0])), Fraction(float(ub[1])), Fraction(float(uf[0])))

    def raw_apply(self, g: HeisPoint) -> HeisPoint:
        """Formula on the group: left-translate the core image; coset-equivariant."""
        P = self.perturbation_element(g.x % 1, g.y % 1)
        return multiply(P, apply(self.core, g))

    def evaluate(self, p: NilPoint) -> NilPoint:
        """Apply to a quotient point: core, then perturbation, then reduce."""
        return reduce(self.raw_apply(p.rep))[0]

    def induced_base_map(self) -> TorusMap:
        """The quotient torus dynamics: core abelianization plus base modes."""
        return TorusMap(abelianization(self.core), self.base)

    def inverse(self) -> "FiberedMapSpec":
        """Exact inverse spec; available when the base perturbation vanishes.

        With only a central fiber shift, f(g) = zeta(uf(b)) core(g) inverts
        to core^{-1} composed with the shifted central element: the inverse
        has core^{-1} and fiber term -e * uf(M^{-1} (x, y)).
        """
        if not self.base.is_zero:
            raise ValueError("inverse spec implemented for fiber-only perturbations")
        core_inv = invert_automorphism(self.core)
        fib = self.fiber.compose_linear(self.core.M.inverse_unimodular()).scaled(-float(self.core.e))
        return FiberedMapSpec(core_inv, Fourier2D.zero(2), fib)

    # -- derivatives ---------------------------------------------------------

    def jacobian_frame_grid(self, x, y) -> np.ndarray:
        """Derivative in the left-invariant frame at points (x, y, any z).

        Exact analytic differentiation of the polynomial core and Fourier
        perturbations; the fiber column is (0, 0, e) because fibers map to
        fibers.  The result is z-independent, which the finite-difference
        oracle in the tests confirms.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        (a, b), (c, d) = self.core.M.rows
        e = float(self.core.e)
        alpha, beta, gamma = (float(q) for q in self.core.quad)
        r = self.core.r2 / 2.0
        s = self.core.s2 / 2.0

        Y = c * x + d * y
        u = self.base(x, y)
        du = self.base.gradient(x, y)
        duf = self.fiber.gradient(x, y)
        u1 = u[..., 0]
        u1x, u1y = du[..., 0, 0], du[..., 0, 1]
        u2x, u2y = du[..., 1, 0], du[..., 1, 1]
        ufx, ufy = duf[..., 0, 0], duf[..., 0, 1]

        Zx = 2 * alpha * x + gamma * y + r
        Zy = 2 * beta * y + gamma * x + s

        J = np.zeros(shape + (3, 3))
        J[..., 0, 0] = a + u1x
        J[..., 0, 1] = b + u1y
        J[..., 1, 0] = c + u2x
        J[..., 1, 1] = d + u2y
        J[..., 2, 2] = e
        j31 = Zx + ufx + u1x * Y + u1 * c
        j32 = Zy + ufy + u1y * Y + u1 * d
        # frame change: right-multiply by L(p) (adds x * fiber column to the
        # y column), left-multiply by L(F(p))^{-1} (subtracts F1 * row 2)
        F1 = a * x + b * y + u1
        J[..., 2, 0] = j31 - F1 * (c + u2x)
        J[..., 2, 1] = j32 + x * e - F1 * (d + u2y)
        return J

    def jacobian_frame(self, p: NilPoint) -> np.ndarray:
        """3x3 frame derivative at a quotient point."""
        return self.jacobian_frame_grid(float(p.rep.x), float(p.rep.y))

    def to_json(self) -> dict:
        return {
            "core": self.core.to_json(),
            "base_modes": self.base.to_json(),
            "fiber_modes": self.fiber.to_json(),
        }


def fibered_map(
    core: HeisAutomorphism,
    base_eps: float = 0.0,
    fiber_eps: float = 0.0,
    base_modes: list | None = None,
    fiber_modes: list | None = None,
) -> FiberedMapSpec:
    """Assemble a spec from amplitude knobs and optional mode tables.

    Defaults reproduce the reference shapes: base displacement
    base_eps * (sin 2 pi x, sin 2 pi y) / (2 pi) and fiber shift
    fiber_eps * sin(2 pi x).
    """
    if base_modes is None:
        base = Fourier2D(
            modes=[[1, 0], [0, 1]],
            sin_coeffs=[[1.0, 0.0], [0.0, 1.0]],
            cos_coeffs=np.zeros((2, 2)),
        )
    else:
        base = Fourier2D.from_json(base_modes, dim=2)
    if fiber_modes is None:
        fiber = Fourier2D(modes=[[1, 0]], sin_coeffs=[[1.0]], cos_coeffs=[[0.0]])
    else:
        fiber = Fourier2D.from_json(fiber_modes, dim=1)
    base = base.scaled(base_eps / TWO_PI)
    fiber = fiber.scaled(fiber_eps)
    return FiberedMapSpec(core, base, fiber)


def spec_from_json(obj: dict) -> FiberedMapSpec:
    core = HeisAutomorphism.from_json(obj["core"])
    return fibered_map(
        core,
        base_eps=float(obj.get("base_eps", 0.0)),
        fiber_eps=float(obj.get("fiber_eps", 0.0)),
        base_modes=obj.get("base_modes"),
        fiber_modes=obj.get("fiber_modes"),
    )


# -- partial hyperbolicity by cone fields -------------------------------------


@dataclass(frozen=True)
class ConeParams:
    """Frame cones around the lifted stable/unstable eigendirections."""

    aperture_unstable: float = np.deg2rad(30.0)
    aperture_stable: float = np.deg2rad(30.0)
    boundary_samples: int = 24

    def __post_init__(self):
        for ap in (self.aperture_unstable, self.aperture_stable):
            if not 0 < ap < np.pi / 2:
                raise ValueError("cone apertures must lie in (0, pi/2)")


@dataclass
class PHReport:
    """Worst-case cone-field margins for the two partial-hyperbolicity chains."""

    grid_n: int
    unstable_expansion_min: float
    stable_contraction_max: float
    center_rate_min: float
    center_rate_max: float
    cone_margin_unstable: float
    cone_margin_stable: float
    passed: bool

    @property
    def margins(self) -> dict:
        return {
            "expansion": self.unstable_expansion_min - 1.0,
            "contraction": 1.0 - self.stable_contraction_max,
            "dominates_center_u": self.unstable_expansion_min - self.center_rate_max,
            "dominates_center_s": self.center_rate_min - self.stable_contraction_max,
            "cone_unstable": self.cone_margin_unstable,
            "cone_stable": self.cone_margin_stable,
        }

    def to_json(self) -> dict:
        return {
            "grid_n": self.grid_n,
            "unstable_expansion_min": self.unstable_expansion_min,
            "stable_contraction_max": self.stable_contraction_max,
            "center_rate": [self.center_rate_min, self.center_rate_max],
            "margins": self.margins,
            "passed": self.passed,
        }


def _cone_samples(axis: np.ndarray, aperture: float, count: int) -> np.ndarray:
    """Unit vectors on and inside the cone boundary (3, count + 1)."""
    axis = axis / np.linalg.norm(axis)
    ref = np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    b1 = np.cross(axis, ref)
    b1 /= np.linalg.norm(b1)
    b2 = np.cross(axis, b1)
    t = np.linspace(0, 2 * np.pi, count, endpoint=False)
    boundary = (
        np.cos(aperture) * axis[:, None]
        + np.sin(aperture) * (np.cos(t) * b1[:, None] + np.sin(t) * b2[:, None])
    )
    return np.concatenate([axis[:, None], boundary], axis=1)


def verify_partial_hyperbolicity(
    f: FiberedMapSpec,
    cones: ConeParams,
    grid_n: int,
    cert=None,
) -> PHReport:
    """Cone-field certification of the partial-hyperbolicity inequalities.

    On a grid_n^3 grid: the frame derivative must map the unstable cone
    strictly into itself with minimal expansion > 1, its inverse must do the
    same for the stable cone, and the fiber (center) rate must sit strictly
    between the stable contraction and unstable expansion.  Violations
    surface as nonpositive margins in the report, not exceptions.
    """
    if grid_n < 8:
        raise ValueError("grid_n >= 8 required")
    from .autos import hyperbolicity_certificate

    if cert is None:
        cert = hyperbolicity_certificate(abelianization(f.core))
    if cert.certified:
        vu, vs = cert.unstable_vector, cert.stable_vector
    else:
        # no eigen-splitting to certify against; probe with coordinate axes
        vu, vs = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    axis_u = np.array([vu[0], vu[1], 0.0])
    axis_s = np.array([vs[0], vs[1], 0.0])

    ii = np.arange(grid_n) / grid_n
    gx, gy, _gz = np.meshgrid(ii, ii, ii / 2.0, indexing="ij")
    J = f.jacobian_frame_grid(gx.ravel(), gy.ravel())
    Jinv = np.linalg.inv(J)

    Wu = _cone_samples(axis_u, cones.aperture_unstable, cones.boundary_samples)
    Ws = _cone_samples(axis_s, cones.aperture_stable, cones.boundary_samples)

    img_u = J @ Wu          # (P, 3, S)
    norms_u = np.linalg.norm(img_u, axis=1)
    cos_u = np.einsum("psk,s->pk", img_u, axis_u / np.linalg.norm(axis_u)) / norms_u
    ang_u = np.arccos(np.clip(cos_u, -1.0, 1.0))

    img_s = Jinv @ Ws
    norms_s = np.linalg.norm(img_s, axis=1)
    cos_s = np.einsum("psk,s->pk", img_s, axis_s / np.linalg.norm(axis_s)) / norms_s
    ang_s = np.arccos(np.clip(cos_s, -1.0, 1.0))

    center = np.linalg.norm(J[..., :, 2], axis=-1)

    report = PHReport(
        grid_n=grid_n,
        unstable_expansion_min=float(norms_u.min()),
        stable_contraction_max=float(1.0 / norms_s.min()),
        center_rate_min=float(center.min()),
        center_rate_max=float(center.max()),
        cone_margin_unstable=float(cones.aperture_unstable - ang_u.max()),
        cone_margin_stable=float(cones.aperture_stable - ang_s.max()),
        passed=False,
    )
    report.passed = all(v > 0 for v in report.margins.values())
    return report
