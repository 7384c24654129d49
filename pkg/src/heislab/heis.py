"""Exact arithmetic in the 3-dimensional Heisenberg group and its compact quotient.

Group elements (x, y, z) stand for the unipotent matrices
[[1, x, z], [0, 1, y], [0, 0, 1]], so the product is
(x, y, z) * (x', y', z') = (x + x', y + y', z + z' + x*y').
The lattice is {(a, b, c) : a, b, 2c integers}; the quotient by right
cosets is a compact nilmanifold fibering over the 2-torus in (x, y).

All group arithmetic is exact over the rationals; floating point enters
only through the frame metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational


def as_fraction(v) -> Fraction:
    """Coerce ints, rationals, floats, and 'p/q' strings to Fraction."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, Rational):
        return Fraction(v)
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, float):
        return Fraction(v)  # exact binary expansion
    if isinstance(v, int):
        return Fraction(v)
    raise TypeError(f"cannot interpret {v!r} as an exact rational")


def fraction_str(q: Fraction) -> str:
    """Serialize as a decimal-free 'p/q' string ('0/1' for zero)."""
    q = as_fraction(q)
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class HeisPoint:
    """Group element (x, y, z) with exact rational coordinates."""

    x: Fraction
    y: Fraction
    z: Fraction

    def __post_init__(self):
        object.__setattr__(self, "x", as_fraction(self.x))
        object.__setattr__(self, "y", as_fraction(self.y))
        object.__setattr__(self, "z", as_fraction(self.z))

    def to_json(self) -> dict:
        return {"x": fraction_str(self.x), "y": fraction_str(self.y), "z": fraction_str(self.z)}

    @staticmethod
    def from_json(obj: dict) -> "HeisPoint":
        return HeisPoint(Fraction(obj["x"]), Fraction(obj["y"]), Fraction(obj["z"]))


IDENTITY = HeisPoint(Fraction(0), Fraction(0), Fraction(0))


@dataclass(frozen=True)
class LatticeElement:
    """Lattice element (a, b, c2/2) with a, b, c2 integers."""

    a: int
    b: int
    c2: int  # stores 2c so the z-coordinate c = c2/2 is an exact half-integer

    @property
    def c(self) -> Fraction:
        return Fraction(self.c2, 2)

    def to_heis(self) -> HeisPoint:
        return HeisPoint(Fraction(self.a), Fraction(self.b), Fraction(self.c2, 2))

    @property
    def is_identity(self) -> bool:
        return self.a == 0 and self.b == 0 and self.c2 == 0


LATTICE_IDENTITY = LatticeElement(0, 0, 0)


@dataclass(frozen=True)
class BasePoint:
    """Point of the base 2-torus with exact rational coordinates in [0, 1)."""

    u: Fraction
    v: Fraction

    def __post_init__(self):
        object.__setattr__(self, "u", as_fraction(self.u) % 1)
        object.__setattr__(self, "v", as_fraction(self.v) % 1)

    def to_json(self) -> list:
        return [fraction_str(self.u), fraction_str(self.v)]


def multiply(g: HeisPoint, h: HeisPoint) -> HeisPoint:
    """Group product (x+x', y+y', z+z'+x*y'), exactly."""
    return HeisPoint(g.x + h.x, g.y + h.y, g.z + h.z + g.x * h.y)


def inverse(g: HeisPoint) -> HeisPoint:
    """Group inverse (-x, -y, x*y - z); multiply(g, inverse(g)) is the identity."""
    return HeisPoint(-g.x, -g.y, g.x * g.y - g.z)


def lattice_multiply(g: LatticeElement, h: LatticeElement) -> LatticeElement:
    c2 = g.c2 + h.c2 + 2 * g.a * h.b
    return LatticeElement(g.a + h.a, g.b + h.b, c2)


def lattice_inverse(g: LatticeElement) -> LatticeElement:
    return LatticeElement(-g.a, -g.b, 2 * g.a * g.b - g.c2)


def in_lattice(g: HeisPoint) -> bool:
    return g.x.denominator == 1 and g.y.denominator == 1 and (2 * g.z).denominator == 1


@dataclass(frozen=True)
class NilPoint:
    """Canonical coset representative on the quotient nilmanifold.

    The representative lives in the half-open box
    [0,1) x [0,1) x [0,1/2); `reduce` is the only sanctioned constructor.
    """

    rep: HeisPoint

    def __post_init__(self):
        r = self.rep
        if not (0 <= r.x < 1 and 0 <= r.y < 1 and 0 <= r.z < Fraction(1, 2)):
            raise ValueError(f"representative {r} outside the fundamental box")

    def to_json(self) -> dict:
        return self.rep.to_json()

    @staticmethod
    def from_json(obj: dict) -> "NilPoint":
        return NilPoint(HeisPoint.from_json(obj))


NIL_ORIGIN = NilPoint(IDENTITY)


def reduce(g: HeisPoint) -> tuple[NilPoint, LatticeElement]:
    """Canonical fundamental-domain reduction: returns (n, gamma) with g*gamma = n.rep.

    Reduction order is x, then y, then z: the z-correction from the y-step
    depends on the already-reduced x, which makes the representative
    canonical (one representative per right coset). Boundary points resolve
    to the low side of the half-open box.
    """
    a = -math.floor(g.x)
    x1 = g.x + a
    b = -math.floor(g.y)
    y1 = g.y + b
    # right-multiplying by (a, b, *) turns z into z + c + b*(x + a)
    z1 = g.z + b * x1
    two_z = 2 * z1
    k = math.floor(two_z)
    c = -Fraction(k, 2)
    z2 = z1 + c
    gamma = LatticeElement(a, b, 2 * a * b - k)
    return NilPoint(HeisPoint(x1, y1, z2)), gamma


def nil_multiply_check(p: NilPoint, gamma: LatticeElement, g: HeisPoint) -> bool:
    """Exact check that g * gamma equals the stored representative."""
    return multiply(g, gamma.to_heis()) == p.rep


def project_base(p: NilPoint) -> BasePoint:
    """Bundle projection to the 2-torus; constant along each circle fiber."""
    return BasePoint(p.rep.x, p.rep.y)


def log_coords(g: HeisPoint) -> tuple[float, float, float]:
    """Lie-algebra coordinates of g: (x, y, z - x*y/2)."""
    return (float(g.x), float(g.y), float(g.z - g.x * g.y / 2))


_TRANSLATES = [
    LatticeElement(a, b, c2)
    for a in range(-2, 3)
    for b in range(-2, 3)
    for c2 in range(-2, 3)
]


def frame_distance(p: NilPoint, q: NilPoint) -> float:
    """Quotient distance from the left-invariant frame metric.

    The frame X = dx, Y = dy + x dz, Z = dz is declared orthonormal; the
    distance between group elements is approximated by the Euclidean norm
    of the log-difference in frame coordinates, minimized over lattice
    translates with |a|, |b|, |2c| <= 2 and symmetrized over the argument
    order. Truncation is exact for points at distance < 1/2.
    """
    if p.rep == q.rep:
        return 0.0

    def one_sided(u: HeisPoint, w: HeisPoint) -> float:
        diff = multiply(inverse(u), w)
        best = math.inf
        for gam in _TRANSLATES:
            lx, ly, lz = log_coords(multiply(diff, gam.to_heis()))
            d = math.sqrt(lx * lx + ly * ly + lz * lz)
            if d < best:
                best = d
        return best

    return min(one_sided(p.rep, q.rep), one_sided(q.rep, p.rep))


def torus_distance(a: BasePoint, b: BasePoint) -> float:
    """Flat distance on the 2-torus between exact base points."""
    du = float(a.u - b.u)
    dv = float(a.v - b.v)
    du -= round(du)
    dv -= round(dv)
    return math.hypot(du, dv)
