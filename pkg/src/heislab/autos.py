"""Lattice-preserving automorphisms, integer matrices, and hyperbolicity certificates.

An automorphism acts by (x, y, z) ->
(a x + b y, c x + d y, e z + (ac/2) x^2 + (bd/2) y^2 + bc xy + r x + s y)
with e = det[[a, b], [c, d]].  The quadratic coefficients are forced by the
group-homomorphism identity; only the matrix and the half-integer linear
part (r, s) are free.
"""

from __future__ import annotations

import cmath
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (
    BasepointInconsistency,
    HomomorphismViolation,
    LatticeNotPreserved,
    NonIntegerPeriods,
    NotCertified,
    NotUnimodular,
)
from .heis import HeisPoint, LatticeElement, NilPoint, in_lattice, multiply, reduce


class IntMatrix:
    """Immutable square integer matrix with exact arithmetic."""

    __slots__ = ("rows", "n")

    def __init__(self, rows):
        self.rows = tuple(tuple(int(v) for v in row) for row in rows)
        self.n = len(self.rows)
        if any(len(r) != self.n for r in self.rows):
            raise ValueError("matrix must be square")

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def __eq__(self, other):
        return isinstance(other, IntMatrix) and self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def __repr__(self):
        return f"IntMatrix({[list(r) for r in self.rows]})"

    def __matmul__(self, other: "IntMatrix") -> "IntMatrix":
        n = self.n
        return IntMatrix(
            [[sum(self.rows[i][k] * other.rows[k][j] for k in range(n)) for j in range(n)]
             for i in range(n)]
        )

    def __add__(self, other: "IntMatrix") -> "IntMatrix":
        return IntMatrix(
            [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(self.rows, other.rows)]
        )

    def __sub__(self, other: "IntMatrix") -> "IntMatrix":
        return IntMatrix(
            [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(self.rows, other.rows)]
        )

    def __neg__(self) -> "IntMatrix":
        return IntMatrix([[-a for a in r] for r in self.rows])

    @staticmethod
    def identity(n: int) -> "IntMatrix":
        return IntMatrix([[1 if i == j else 0 for j in range(n)] for i in range(n)])

    def power(self, m: int) -> "IntMatrix":
        if m < 0:
            return self.inverse_unimodular().power(-m)
        out = IntMatrix.identity(self.n)
        base = self
        while m:
            if m & 1:
                out = out @ base
            base = base @ base
            m >>= 1
        return out

    def det(self) -> int:
        """Exact determinant by cofactor expansion (dimensions here are tiny)."""
        n = self.n
        if n == 1:
            return self.rows[0][0]
        if n == 2:
            return self.rows[0][0] * self.rows[1][1] - self.rows[0][1] * self.rows[1][0]
        total = 0
        for j in range(n):
            minor = IntMatrix(
                [[self.rows[i][k] for k in range(n) if k != j] for i in range(1, n)]
            )
            total += (-1) ** j * self.rows[0][j] * minor.det()
        return total

    def trace(self) -> int:
        return sum(self.rows[i][i] for i in range(self.n))

    def transpose(self) -> "IntMatrix":
        return IntMatrix(list(zip(*self.rows)))

    def inverse_unimodular(self) -> "IntMatrix":
        """Exact inverse, valid only when det = +-1."""
        d = self.det()
        if d not in (1, -1):
            raise NotUnimodular(f"det = {d}, cannot invert over the integers")
        n = self.n
        if n == 1:
            return IntMatrix([[d]])
        cof = [
            [
                (-1) ** (i + j)
                * IntMatrix(
                    [[self.rows[r][c] for c in range(n) if c != j] for r in range(n) if r != i]
                ).det()
                for j in range(n)
            ]
            for i in range(n)
        ]
        adj = IntMatrix(cof).transpose()
        return IntMatrix([[v * d for v in row] for row in adj.rows])

    def to_numpy(self) -> np.ndarray:
        return np.array(self.rows, dtype=float)

    def apply_fraction(self, vec):
        return tuple(
            sum(Fraction(self.rows[i][j]) * vec[j] for j in range(self.n))
            for i in range(self.n)
        )

    def to_json(self):
        return [list(r) for r in self.rows]


@dataclass(frozen=True)
class HeisAutomorphism:
    """Automorphism data: 2x2 unimodular matrix plus half-integer linear part."""

    M: IntMatrix
    r2: int = 0
    s2: int = 0

    @property
    def e(self) -> int:
        return self.M.det()

    @property
    def quad(self) -> tuple[Fraction, Fraction, Fraction]:
        """Coefficients (alpha, beta, gamma) of alpha x^2 + beta y^2 + gamma xy."""
        (a, b), (c, d) = self.M.rows
        return Fraction(a * c, 2), Fraction(b * d, 2), Fraction(b * c)

    def to_json(self) -> dict:
        return {"M": self.M.to_json(), "r2": self.r2, "s2": self.s2}

    @staticmethod
    def from_json(obj: dict) -> "HeisAutomorphism":
        return make_automorphism(IntMatrix(obj["M"]), int(obj.get("r2", 0)), int(obj.get("s2", 0)))


def apply(phi: HeisAutomorphism, g: HeisPoint) -> HeisPoint:
    """Exact evaluation of the automorphism polynomial formula."""
    (a, b), (c, d) = phi.M.rows
    alpha, beta, gamma = phi.quad
    x, y, z = g.x, g.y, g.z
    return HeisPoint(
        a * x + b * y,
        c * x + d * y,
        phi.e * z
        + alpha * x * x
        + beta * y * y
        + gamma * x * y
        + Fraction(phi.r2, 2) * x
        + Fraction(phi.s2, 2) * y,
    )


def apply_nil(phi: HeisAutomorphism, p: NilPoint) -> NilPoint:
    """Descend to the quotient: apply to the representative, then reduce."""
    return reduce(apply(phi, p.rep))[0]


_LATTICE_GENERATORS = (
    HeisPoint(Fraction(1), Fraction(0), Fraction(0)),
    HeisPoint(Fraction(0), Fraction(1), Fraction(0)),
    HeisPoint(Fraction(0), Fraction(0), Fraction(1, 2)),
)


def _random_fraction(rng: random.Random) -> Fraction:
    return Fraction(rng.randint(-12, 12), rng.randint(1, 9))


def make_automorphism(M: IntMatrix, r2: int = 0, s2: int = 0,
                      validation_samples: int = 12, seed: int = 0) -> HeisAutomorphism:
    """Build and validate a lattice-preserving automorphism.

    Raises NotUnimodular unless det = +-1, HomomorphismViolation if the exact
    identity phi(g)phi(g') = phi(gg') fails on randomized rational points, and
    LatticeNotPreserved if a lattice generator maps outside the lattice.
    """
    if M.n != 2:
        raise ValueError("Heisenberg automorphisms need a 2x2 abelianized matrix")
    if M.det() not in (1, -1):
        raise NotUnimodular(f"det M = {M.det()}")
    if r2 != int(r2) or s2 != int(s2):
        raise TypeError("2r and 2s must be integers so the lattice is preserved")
    phi = HeisAutomorphism(M, int(r2), int(s2))
    rng = random.Random(seed)
    for _ in range(validation_samples):
        g = HeisPoint(_random_fraction(rng), _random_fraction(rng), _random_fraction(rng))
        h = HeisPoint(_random_fraction(rng), _random_fraction(rng), _random_fraction(rng))
        if apply(phi, multiply(g, h)) != multiply(apply(phi, g), apply(phi, h)):
            raise HomomorphismViolation(f"identity fails at {g}, {h}")
    for gen in _LATTICE_GENERATORS:
        if not in_lattice(apply(phi, gen)):
            raise LatticeNotPreserved(f"image of {gen} leaves the lattice")
    return phi


def identity_automorphism() -> HeisAutomorphism:
    return make_automorphism(IntMatrix.identity(2))


def f0() -> HeisAutomorphism:
    """The standard fibered example: (x,y,z) -> (2x+y, x+y, z + x^2 + y^2/2 + xy)."""
    return make_automorphism(IntMatrix([[2, 1], [1, 1]]))


def compose(phi: HeisAutomorphism, psi: HeisAutomorphism) -> HeisAutomorphism:
    """Composition phi o psi; the shear data follows from the homomorphism identity."""
    (ap, bp), (cp, dp) = psi.M.rows
    r2 = phi.e * psi.r2 + phi.r2 * ap + phi.s2 * cp
    s2 = phi.e * psi.s2 + phi.r2 * bp + phi.s2 * dp
    return make_automorphism(phi.M @ psi.M, r2, s2)


def invert_automorphism(phi: HeisAutomorphism) -> HeisAutomorphism:
    Minv = phi.M.inverse_unimodular()
    (ai, bi), (ci, di) = Minv.rows
    e = phi.e
    r2 = -e * (phi.r2 * ai + phi.s2 * ci)
    s2 = -e * (phi.r2 * bi + phi.s2 * di)
    return make_automorphism(Minv, r2, s2)


def abelianization(phi: HeisAutomorphism) -> IntMatrix:
    """The induced linear map on the base torus."""
    return phi.M


def induced_matrix(f, tol: float = 1e-6) -> IntMatrix:
    """Integer linear part of a torus map read off from its lift.

    Column j is f_lift(x0 + e_j) - f_lift(x0); the result must be
    near-integer (NonIntegerPeriods otherwise) and identical at three base
    points (BasepointInconsistency otherwise).
    """
    basepoints = [(0.13, 0.29), (0.41, 0.77), (0.68, 0.07)]
    results = []
    for x0 in basepoints:
        p0 = np.asarray(f.lift(np.array([x0[0]]), np.array([x0[1]])))
        cols = []
        for ej in ((1.0, 0.0), (0.0, 1.0)):
            pj = np.asarray(f.lift(np.array([x0[0] + ej[0]]), np.array([x0[1] + ej[1]])))
            cols.append((pj - p0).ravel())
        Mfloat = np.stack(cols, axis=1)
        Mint = np.round(Mfloat)
        if np.abs(Mfloat - Mint).max() > tol:
            raise NonIntegerPeriods(f"period data {Mfloat} not integer at {x0}")
        results.append(IntMatrix(Mint.astype(int).tolist()))
    if not (results[0] == results[1] == results[2]):
        raise BasepointInconsistency(f"{results}")
    return results[0]


@dataclass(frozen=True)
class HyperbolicityCertificate:
    """Eigenvalue data certifying absence of modulus-one spectrum.

    `gap` is min | |lambda_i| - 1 |; `lam` the smallest unstable modulus
    (the expansion constant, > 1 when certified); bases are unit real
    eigenvectors (or real invariant-plane bases for complex pairs).
    """

    matrix: IntMatrix
    eigenvalues: tuple[complex, ...]
    gap: float
    certified: bool
    lam: float | None
    lam_stable: float | None
    unstable_basis: tuple[tuple[float, ...], ...] = field(default_factory=tuple)
    stable_basis: tuple[tuple[float, ...], ...] = field(default_factory=tuple)
    exact_witness: str | None = None

    @property
    def unstable_vector(self) -> np.ndarray:
        return np.array(self.unstable_basis[0])

    @property
    def stable_vector(self) -> np.ndarray:
        return np.array(self.stable_basis[0])


def _eig_2x2(M: IntMatrix) -> tuple[complex, complex]:
    t, d = M.trace(), M.det()
    disc = t * t - 4 * d
    if disc >= 0:
        s = math.sqrt(disc)
        return ((t + s) / 2.0, (t - s) / 2.0)
    s = cmath.sqrt(disc)
    return ((t + s) / 2, (t - s) / 2)


def _unit_eigenvector_2x2(M: IntMatrix, lam: float) -> tuple[float, float]:
    (a, b), (c, d) = M.rows
    # rows of (M - lam I) are both orthogonal complements of the eigenvector
    v1 = (b, lam - a)
    v2 = (lam - d, c)
    v = v1 if math.hypot(*v1) >= math.hypot(*v2) else v2
    n = math.hypot(*v)
    return (v[0] / n, v[1] / n)


def hyperbolicity_certificate(M: IntMatrix, tol: float = 1e-9) -> HyperbolicityCertificate:
    """Certify that M has no eigenvalue of modulus one.

    For integer 2x2 unimodular matrices the decision is exact: with det = 1
    hyperbolicity is equivalent to |trace| >= 3, with det = -1 to trace != 0.
    Larger matrices fall back to numerical eigenvalues; NotCertified is
    raised when the spectral gap is below `tol` without an exact witness.
    """
    d = M.det()
    if d not in (1, -1):
        raise NotUnimodular(f"det M = {d}")
    if M.n == 2:
        eigs = _eig_2x2(M)
        t = M.trace()
        if d == 1:
            hyperbolic = abs(t) >= 3
            witness = f"det=1, |trace|={abs(t)} {'>=' if hyperbolic else '<'} 3"
        else:
            hyperbolic = t != 0
            witness = f"det=-1, trace={t} {'!=' if hyperbolic else '=='} 0"
        gap = min(abs(abs(ev) - 1.0) for ev in eigs)
        if not hyperbolic:
            return HyperbolicityCertificate(
                matrix=M, eigenvalues=tuple(eigs), gap=gap, certified=False,
                lam=None, lam_stable=None, exact_witness=witness,
            )
        moduli = [abs(ev) for ev in eigs]
        unstable = [ev for ev in eigs if abs(ev) > 1]
        stable = [ev for ev in eigs if abs(ev) < 1]
        lam = min(abs(ev) for ev in unstable)
        lam_s = max(abs(ev) for ev in stable)
        # real spectrum is automatic: complex pairs on the unit circle are excluded
        vu = _unit_eigenvector_2x2(M, float(max(eigs, key=abs).real))
        vs = _unit_eigenvector_2x2(M, float(min(eigs, key=abs).real))
        return HyperbolicityCertificate(
            matrix=M, eigenvalues=tuple(eigs), gap=min(abs(m - 1) for m in moduli),
            certified=True, lam=lam, lam_stable=lam_s,
            unstable_basis=(vu,), stable_basis=(vs,), exact_witness=witness,
        )
    # n >= 3: numerical spectrum via the characteristic polynomial companion form
    eigs = np.linalg.eigvals(M.to_numpy())
    gap = float(np.min(np.abs(np.abs(eigs) - 1.0)))
    if gap <= tol:
        raise NotCertified(f"spectral gap {gap:.3e} below tolerance without exact witness")
    unstable = eigs[np.abs(eigs) > 1]
    stable = eigs[np.abs(eigs) < 1]
    certified = len(unstable) + len(stable) == M.n
    vecs = np.linalg.eig(M.to_numpy()).eigenvectors
    ubasis, sbasis = [], []
    for k in range(M.n):
        if eigs[k].imag < 0:
            continue  # conjugate partner already contributes the invariant plane
        v = vecs[:, k]
        target = ubasis if abs(eigs[k]) > 1 else sbasis
        if abs(eigs[k].imag) > 1e-12:
            target.append(tuple(np.real(v) / np.linalg.norm(np.real(v))))
            target.append(tuple(np.imag(v) / np.linalg.norm(np.imag(v))))
        else:
            w = np.real(v)
            target.append(tuple(w / np.linalg.norm(w)))
    return HyperbolicityCertificate(
        matrix=M, eigenvalues=tuple(eigs.tolist()), gap=gap, certified=certified,
        lam=float(np.min(np.abs(unstable))) if len(unstable) else None,
        lam_stable=float(np.max(np.abs(stable))) if len(stable) else None,
        unstable_basis=tuple(ubasis), stable_basis=tuple(sbasis),
    )
