"""Numerical conjugacy to the linear model: solve A o h = h o f on the torus.

Writing h = id + u with u periodic turns the conjugacy equation into
A u(x) = p(x) + u(f x), where p is the periodic part of the lift of f.
Splitting u along the stable/unstable eigencoordinates of A gives two
fixed-point equations, each a sup-norm contraction: the unstable component
iterates forward with factor 1/lambda_u, the stable one backward (through
the Newton inverse of the lift) with factor lambda_s.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autos import HyperbolicityCertificate, IntMatrix, induced_matrix
from .errors import DegreeMismatch, NoConvergence, NotHyperbolic
from .torus import DisplacementField, TorusMap, PeriodicSpline2D, torus_dist, wrap_centered


@dataclass
class ConjugacyReport:
    """Solver outcome: iteration counts, measured defect, rate, injectivity."""

    iterations: int
    final_change: float
    defect: float
    rate: float
    injectivity_margin: float
    sup_u: float
    changes: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_change": self.final_change,
            "defect": self.defect,
            "rate": self.rate,
            "injectivity_margin": self.injectivity_margin,
            "sup_u": self.sup_u,
        }


def _eigen_frames(cert: HyperbolicityCertificate) -> tuple[np.ndarray, np.ndarray]:
    """Eigenbasis columns and the dual (row) basis for coordinate splitting."""
    basis = np.column_stack([cert.unstable_vector, cert.stable_vector])
    dual = np.linalg.inv(basis)
    return basis, dual


def solve_semiconjugacy(
    f: TorusMap,
    A: IntMatrix,
    cert: HyperbolicityCertificate,
    N: int,
    tol: float = 1e-10,
    max_iter: int = 400,
    defect_grid_factor: int = 4,
    initial: np.ndarray | None = None,
    injectivity_samples: int = 4096,
) -> tuple[DisplacementField, ConjugacyReport]:
    """Solve A o h = h o f for h = id + u homotopic to the identity.

    The displacement u is represented on an N x N periodic grid with bicubic
    interpolation; the two eigencomponent contractions are iterated until the
    sup-norm change drops below `tol`.  The defect is measured afterwards on
    a `defect_grid_factor` x finer grid so interpolation cannot certify
    itself.  Raises DegreeMismatch, NotHyperbolic, or NoConvergence.
    """
    if induced_matrix(f) != A:
        raise DegreeMismatch(f"induced matrix {induced_matrix(f)} != {A}")
    if not cert.certified or cert.matrix != A:
        raise NotHyperbolic("certificate missing or not for this matrix")
    if N < 64 or (N & (N - 1)) != 0:
        raise ValueError("N must be a power of two >= 64")

    lam_u = cert.lam
    lam_s = cert.lam_stable
    basis, dual = _eigen_frames(cert)
    Af = A.to_numpy()

    ii = np.arange(N) / N
    gx, gy = np.meshgrid(ii, ii, indexing="ij")

    # forward images, backward images, and the periodic part at both
    fx, fy = f.lift(gx, gy)
    bx, by = f.inverse_lift(gx, gy)
    px = fx - (Af[0, 0] * gx + Af[0, 1] * gy)
    py = fy - (Af[1, 0] * gx + Af[1, 1] * gy)
    pu = dual[0, 0] * px + dual[0, 1] * py
    fbx, fby = f.lift(bx, by)
    pbx = fbx - (Af[0, 0] * bx + Af[0, 1] * by)
    pby = fby - (Af[1, 0] * bx + Af[1, 1] * by)
    ps_back = dual[1, 0] * pbx + dual[1, 1] * pby

    fwd = (np.mod(fx, 1.0), np.mod(fy, 1.0))
    bwd = (np.mod(bx, 1.0), np.mod(by, 1.0))

    if initial is None:
        uu = np.zeros((N, N))
        us = np.zeros((N, N))
    else:
        init = np.asarray(initial, dtype=float)
        uu = dual[0, 0] * init[..., 0] + dual[0, 1] * init[..., 1]
        us = dual[1, 0] * init[..., 0] + dual[1, 1] * init[..., 1]

    changes: list[float] = []
    iterations = 0
    for iterations in range(1, max_iter + 1):
        uu_spline = PeriodicSpline2D(uu[..., None])
        us_spline = PeriodicSpline2D(us[..., None])
        uu_new = (pu + uu_spline(*fwd)[..., 0]) / lam_u
        us_new = lam_s * us_spline(*bwd)[..., 0] - ps_back
        change = max(np.abs(uu_new - uu).max(), np.abs(us_new - us).max())
        changes.append(float(change))
        uu, us = uu_new, us_new
        if change < tol:
            break
    else:
        raise NoConvergence(
            f"no convergence in {max_iter} iterations (last change {changes[-1]:.3e})"
        )

    u1 = basis[0, 0] * uu + basis[0, 1] * us
    u2 = basis[1, 0] * uu + basis[1, 1] * us
    h = DisplacementField(np.stack([u1, u2], axis=-1))
    defect = conjugacy_defect(h, f, A, defect_grid_factor * N)
    h.meta = {"N": N, "linear": A.to_json(), "tol": tol, "defect": defect}

    rate = _empirical_rate(changes)
    margin = injectivity_probe(h, injectivity_samples)
    report = ConjugacyReport(
        iterations=iterations,
        final_change=changes[-1],
        defect=defect,
        rate=rate,
        injectivity_margin=margin,
        sup_u=h.sup,
        changes=changes,
    )
    return h, report


def _empirical_rate(changes: list[float]) -> float:
    """Geometric-mean contraction factor over the clean middle of the run."""
    if len(changes) < 4:
        return 0.0
    lo = 1
    hi = max(lo + 1, len(changes) - 2)
    span = hi - lo
    return float((changes[hi] / changes[lo]) ** (1.0 / span))


def conjugacy_defect(h: DisplacementField, f: TorusMap, A: IntMatrix, M_grid: int) -> float:
    """Sup over an M_grid x M_grid grid of dist(A h(x), h(f x)) on the torus."""
    Af = A.to_numpy()
    jj = np.arange(M_grid) / M_grid
    qx, qy = np.meshgrid(jj, jj, indexing="ij")
    hx, hy = h.h(qx, qy)
    fqx, fqy = f.lift(qx, qy)
    hfx, hfy = h.h(fqx, fqy)
    dx = Af[0, 0] * hx + Af[0, 1] * hy - hfx
    dy = Af[1, 0] * hx + Af[1, 1] * hy - hfy
    return float(np.hypot(wrap_centered(dx), wrap_centered(dy)).max())


def injectivity_probe(h: DisplacementField, samples: int = 4096, seed: int = 0) -> float:
    """Numerical homeomorphism margin for h = id + u.

    Returns the smaller of (a) the minimum of dist(h(x), h(y)) / dist(x, y)
    over sampled pairs at distance >= 1/N, and (b) the minimum normalized
    signed triangle area over all grid cells (corner images must form a
    consistently oriented quadrilateral).  Nonpositive values flag a
    collapsed or folded map.
    """
    n = h.n
    rng = np.random.default_rng(seed)
    xs = rng.random((samples, 2))
    ang = rng.uniform(0, 2 * np.pi, samples)
    rad = rng.uniform(1.0 / n, 0.5, samples)
    ys = xs + rad[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    hx1, hy1 = h.h(xs[:, 0], xs[:, 1])
    hx2, hy2 = h.h(ys[:, 0], ys[:, 1])
    num = torus_dist(hx1, hy1, hx2, hy2)
    den = torus_dist(xs[:, 0], xs[:, 1], ys[:, 0], ys[:, 1])
    ratio = float((num / den).min())

    # cell-corner orientation test on the lifted grid (corners are nodes)
    u = h.grid
    ii = np.arange(n + 1) / n
    cx, cy = np.meshgrid(ii, ii, indexing="ij")
    uu = np.empty((n + 1, n + 1, 2))
    uu[:n, :n] = u
    uu[n, :n] = u[0, :]
    uu[:n, n] = u[:, 0]
    uu[n, n] = u[0, 0]
    Px = cx + uu[..., 0]
    Py = cy + uu[..., 1]
    p00x, p00y = Px[:-1, :-1], Py[:-1, :-1]
    p10x, p10y = Px[1:, :-1], Py[1:, :-1]
    p11x, p11y = Px[1:, 1:], Py[1:, 1:]
    p01x, p01y = Px[:-1, 1:], Py[:-1, 1:]

    def signed_area(ax, ay, bx, by, cx_, cy_):
        return 0.5 * ((bx - ax) * (cy_ - ay) - (cx_ - ax) * (by - ay))

    t1 = signed_area(p00x, p00y, p10x, p10y, p11x, p11y)
    t2 = signed_area(p00x, p00y, p11x, p11y, p01x, p01y)
    cell_area = 1.0 / (n * n)
    orient = float(min(t1.min(), t2.min()) * 2.0 / cell_area)
    return min(ratio, orient)


def orbit_push_error(
    h: DisplacementField, f: TorusMap, A: IntMatrix, x0: np.ndarray, steps: int
) -> np.ndarray:
    """max dist(A^k h(x), h(f^k x)) over the sample for k = 0..steps."""
    Af = A.to_numpy()
    x, y = np.asarray(x0[:, 0], dtype=float).copy(), np.asarray(x0[:, 1], dtype=float).copy()
    hx, hy = h.h(x, y)
    out = []
    for _ in range(steps + 1):
        tx, ty = h.h(x, y)
        out.append(float(torus_dist(hx, hy, tx, ty).max()))
        x, y = f(x, y)
        hx, hy = (
            Af[0, 0] * hx + Af[0, 1] * hy,
            Af[1, 0] * hx + Af[1, 1] * hy,
        )
    return np.array(out)
