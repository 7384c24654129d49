"""Pseudo-orbits, shadowing points, expansivity probes, product structure.

The shadowing solver corrects a noisy orbit into a true one: the orbit
error recursion v_{i+1} = Df v_i + e_i is solved with bounded corrections
by summing the stable components forward and the unstable components
backward (geometric series in the eigenframe of the linear part); a
Picard-Newton outer loop handles nonlinear maps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autos import HyperbolicityCertificate
from .errors import NewtonDiverged, NotHyperbolic, PullbackFailed
from .torus import DisplacementField, TorusMap, torus_dist, wrap_centered


@dataclass
class PseudoOrbit:
    """Sequence of torus points with measured maximal jump delta."""

    points: np.ndarray  # (L+1, 2), coordinates in [0, 1)
    delta: float
    seed: int | None = None

    @property
    def length(self) -> int:
        return self.points.shape[0] - 1

    def save_csv(self, path) -> None:
        header = "i,x,y"
        rows = np.column_stack([np.arange(len(self.points)), self.points])
        np.savetxt(path, rows, delimiter=",", header=header, comments="")


@dataclass
class ShadowingResult:
    """Shadowing point with measured epsilon and solver residual.

    `orbit` is the corrected true orbit; epsilon is recomputed from it
    (naive forward iteration of shadow_start amplifies roundoff by lambda^n
    and leaves the pseudo-orbit after ~30 steps, so recomputability means
    re-running the correction solve, not iterating in floats).
    """

    shadow_start: np.ndarray
    epsilon: float
    residual: float
    orbit: np.ndarray = field(repr=False, default=None)

    def to_json(self) -> dict:
        return {
            "shadow_start": [float(self.shadow_start[0]), float(self.shadow_start[1])],
            "epsilon": self.epsilon,
            "residual": self.residual,
        }


def measured_delta(f: TorusMap, points: np.ndarray) -> float:
    fx, fy = f(points[:-1, 0], points[:-1, 1])
    return float(torus_dist(fx, fy, points[1:, 0], points[1:, 1]).max())


def generate_pseudo_orbit(
    f: TorusMap, x0, L: int, delta: float, seed: int
) -> PseudoOrbit:
    """Noisy orbit x_{i+1} = f(x_i) + (uniform disk noise of norm < delta)."""
    if L < 1 or delta < 0:
        raise ValueError("need L >= 1 and delta >= 0")
    rng = np.random.default_rng(seed)
    pts = np.empty((L + 1, 2))
    pts[0] = np.mod(np.asarray(x0, dtype=float), 1.0)
    for i in range(L):
        fx, fy = f(pts[i, 0], pts[i, 1])
        if delta > 0:
            ang = rng.uniform(0.0, 2 * np.pi)
            rad = delta * np.sqrt(rng.uniform(0.0, 1.0))
            noise = rad * np.array([np.cos(ang), np.sin(ang)])
        else:
            noise = 0.0
        pts[i + 1] = np.mod(np.array([fx, fy]) + noise, 1.0)
    return PseudoOrbit(points=pts, delta=measured_delta(f, pts), seed=seed)


def _solve_linear_corrections(e_u: np.ndarray, e_s: np.ndarray, lam_u: float, lam_s: float):
    """Bounded solution of v_{i+1} = A v_i + e_i in eigencoordinates.

    Stable components sum forward from v_0 = 0; unstable components solve
    backward from v_L = 0 (free boundary), which keeps sup|v| <= O(delta).
    """
    L = len(e_u)
    v_u = np.zeros(L + 1)
    v_s = np.zeros(L + 1)
    for i in range(L):
        v_s[i + 1] = lam_s * v_s[i] + e_s[i]
    for i in range(L - 1, -1, -1):
        v_u[i] = (v_u[i + 1] - e_u[i]) / lam_u
    return v_u, v_s


def shadow(
    f: TorusMap,
    cert: HyperbolicityCertificate,
    po: PseudoOrbit,
    residual_tol: float = 1e-12,
    max_passes: int = 60,
) -> ShadowingResult:
    """Find the true orbit epsilon-shadowing the pseudo-orbit.

    One correction pass is exact for linear maps; nonlinear maps iterate
    passes (Picard-Newton with the constant eigenframe solver as the
    approximate inverse) until the per-step residual is below residual_tol.
    """
    if not cert.certified:
        raise NotHyperbolic("shadowing needs a certified hyperbolic linear part")
    lam_u, lam_s = cert.lam, cert.lam_stable
    basis = np.column_stack([cert.unstable_vector, cert.stable_vector])
    dual = np.linalg.inv(basis)

    z = po.points.copy()
    residual = np.inf
    for _ in range(max_passes):
        fx, fy = f(z[:-1, 0], z[:-1, 1])
        ex = wrap_centered(fx - z[1:, 0])
        ey = wrap_centered(fy - z[1:, 1])
        residual = float(np.hypot(ex, ey).max())
        if residual < residual_tol:
            break
        e_u = dual[0, 0] * ex + dual[0, 1] * ey
        e_s = dual[1, 0] * ex + dual[1, 1] * ey
        v_u, v_s = _solve_linear_corrections(e_u, e_s, lam_u, lam_s)
        z[:, 0] = np.mod(z[:, 0] + basis[0, 0] * v_u + basis[0, 1] * v_s, 1.0)
        z[:, 1] = np.mod(z[:, 1] + basis[1, 0] * v_u + basis[1, 1] * v_s, 1.0)
    else:
        raise NewtonDiverged(f"orbit residual stalled at {residual:.3e}")

    eps = float(torus_dist(z[:, 0], z[:, 1], po.points[:, 0], po.points[:, 1]).max())
    return ShadowingResult(shadow_start=z[0], epsilon=eps, residual=residual, orbit=z)


def linear_shadowing_bound(cert: HyperbolicityCertificate) -> float:
    """Analytic epsilon/delta ratio 1/(1 - lam_s) + 1/(lam_u - 1) for linear maps."""
    return 1.0 / (1.0 - cert.lam_stable) + 1.0 / (cert.lam - 1.0)


def expansivity_probe(
    f: TorusMap,
    cert: HyperbolicityCertificate,
    pairs: int,
    horizon: int,
    seed: int = 0,
    min_sep: float = 1e-4,
    max_sep: float = 0.4,
) -> float:
    """Empirical expansivity constant (a witness, not a proof).

    Samples pairs at log-uniform separations, tracks them over |n| <= horizon,
    and returns the largest c such that every sampled pair with dist < c
    separates to at least c somewhere in the window; that largest feasible c
    equals min over pairs of max(initial distance, window maximum).
    """
    if horizon < 10:
        raise ValueError("horizon >= 10 required")
    rng = np.random.default_rng(seed)
    xs = rng.random((pairs, 2))
    ang = rng.uniform(0, 2 * np.pi, pairs)
    sep = np.exp(rng.uniform(np.log(min_sep), np.log(max_sep), pairs))
    ys = np.mod(xs + sep[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=-1), 1.0)

    d0 = torus_dist(xs[:, 0], xs[:, 1], ys[:, 0], ys[:, 1])
    m = d0.copy()

    ax, ay = xs[:, 0].copy(), xs[:, 1].copy()
    bx, by = ys[:, 0].copy(), ys[:, 1].copy()
    for _ in range(horizon):
        ax, ay = f(ax, ay)
        bx, by = f(bx, by)
        m = np.maximum(m, torus_dist(ax, ay, bx, by))
    ax, ay = xs[:, 0].copy(), xs[:, 1].copy()
    bx, by = ys[:, 0].copy(), ys[:, 1].copy()
    for _ in range(horizon):
        ax, ay = f.inverse_lift(ax, ay)
        ax, ay = np.mod(ax, 1.0), np.mod(ay, 1.0)
        bx, by = f.inverse_lift(bx, by)
        bx, by = np.mod(bx, 1.0), np.mod(by, 1.0)
        m = np.maximum(m, torus_dist(ax, ay, bx, by))

    return float(np.minimum(np.maximum(d0, m), np.inf).min()) if pairs else 0.0


def product_structure_intersect(
    f: TorusMap,
    h: DisplacementField,
    cert: HyperbolicityCertificate,
    x,
    y,
    horizon: int = 30,
    tol: float = 1e-6,
    newton_seed_offset=None,
) -> tuple[np.ndarray, dict]:
    """The unique point of W^s(x) with W^u(y) through the conjugacy.

    In the linear model the intersection carries h(x)'s unstable coordinate
    and h(y)'s stable coordinate (forward orbits then track x, backward
    orbits track y); the point is pulled back through a local Newton inverse
    of h.  Returns (z, diagnostics) where diagnostics hold the forward and
    backward tracking residuals min_{n <= horizon} dist(f^{+-n} z, f^{+-n} x_or_y)
    (the minimum over the window is used because float iteration amplifies
    roundoff by lambda^n).
    """
    basis = np.column_stack([cert.unstable_vector, cert.stable_vector])
    dual = np.linalg.inv(basis)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    hx = np.array(h.h(x[0], x[1]), dtype=float).ravel()
    hy = np.array(h.h(y[0], y[1]), dtype=float).ravel()
    cu = dual[0] @ hx  # unstable coordinate from x's side
    cs = dual[1] @ hy  # stable coordinate from y's side
    z_lin = basis @ np.array([cu, cs])
    target = (np.array([z_lin[0] % 1.0]), np.array([z_lin[1] % 1.0]))
    init = None
    if newton_seed_offset is not None:
        off = np.asarray(newton_seed_offset, dtype=float)
        init = (target[0] + off[0], target[1] + off[1])
    try:
        zx, zy = h.h_inverse(*target, initial=init)
    except NewtonDiverged as exc:
        raise PullbackFailed(str(exc)) from exc
    z = np.array([zx[0], zy[0]])

    fwd = []
    px, py = z.copy(), x.copy()
    for _ in range(horizon + 1):
        fwd.append(float(torus_dist(px[0], px[1], py[0], py[1])))
        px = np.array(f(px[0], px[1]), dtype=float).ravel()
        py = np.array(f(py[0], py[1]), dtype=float).ravel()
    bwd = []
    px, py = z.copy(), y.copy()
    for _ in range(horizon + 1):
        bwd.append(float(torus_dist(px[0], px[1], py[0], py[1])))
        ivx, ivy = f.inverse_lift(np.array([px[0]]), np.array([px[1]]))
        px = np.array([ivx[0] % 1.0, ivy[0] % 1.0])
        ivx, ivy = f.inverse_lift(np.array([py[0]]), np.array([py[1]]))
        py = np.array([ivx[0] % 1.0, ivy[0] % 1.0])
    diag = {
        "z_lift": z_lin,
        "forward_min": min(fwd),
        "backward_min": min(bwd),
        "forward_ok": min(fwd) < tol,
        "backward_ok": min(bwd) < tol,
    }
    return z, diag
