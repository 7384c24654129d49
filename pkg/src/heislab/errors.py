"""Exception types shared across the package."""


class HeislabError(Exception):
    """Base class for all package-specific failures."""


class NotUnimodular(HeislabError):
    """Integer matrix does not have determinant +-1."""


class HomomorphismViolation(HeislabError):
    """Candidate automorphism fails the exact group-homomorphism identity."""


class LatticeNotPreserved(HeislabError):
    """Automorphism maps a lattice generator outside the lattice."""


class NonIntegerPeriods(HeislabError):
    """Torus-map lift has non-integer period data."""


class BasepointInconsistency(HeislabError):
    """Induced matrix differs between base points."""


class NotCertified(HeislabError):
    """Hyperbolicity cannot be certified (spectral gap below tolerance)."""


class NotHyperbolic(HeislabError):
    """Operation requires a certified hyperbolic linear part."""


class NotEquivariant(HeislabError):
    """Fibered map formula is not invariant under deck transformations."""


class DegreeMismatch(HeislabError):
    """Torus map is not homotopic to the supplied linear model."""


class NoConvergence(HeislabError):
    """Fixed-point iteration exhausted its budget."""


class NewtonDiverged(HeislabError):
    """Newton refinement failed to reach its residual target."""


class SingularAtM(HeislabError):
    """det(A^m - I) = 0, so period-m fixed points are not isolated."""


class CountMismatch(HeislabError):
    """Newton-refined periodic-point count disagrees with the Lefschetz count.

    Carries diagnostics: expected count, found count, and the lost/merged
    seed list.
    """

    def __init__(self, message: str, expected: int, found: int, diagnostics=None):
        super().__init__(message)
        self.expected = expected
        self.found = found
        self.diagnostics = diagnostics or {}


class NotFibered(HeislabError):
    """Map does not preserve the circle-fiber direction."""


class NotContracting(HeislabError):
    """Graph transform is not a sup-norm contraction (sup|K| * sup|A^-1| >= 1)."""


class ReductionDiverged(HeislabError):
    """Structure-group reduction left the convergent regime."""


class ChartRefinementFailed(HeislabError):
    """Pullback cover refinement exceeded its subdivision budget."""


class NotCohomologous(HeislabError):
    """No valid fiber identification between the two cocycles."""


class InconsistentRotationField(HeislabError):
    """No chart-consistent rotation field for this (A, cocycle) pair."""


class PullbackFailed(HeislabError):
    """Local Newton inversion of the conjugacy failed near the target."""
