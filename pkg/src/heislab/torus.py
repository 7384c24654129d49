"""Torus self-maps and periodic displacement fields.

A TorusMap is a lift x -> L x + u(x) with L an integer matrix and u a
Z^2-periodic displacement given either by a truncated Fourier series or by
an N x N grid with periodic bicubic interpolation.  DisplacementField is
the grid form used for conjugacies h = id + u with u(0,0) = 0.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .autos import IntMatrix
from .errors import NewtonDiverged

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Fourier2D:
    """Truncated real Fourier series on the 2-torus with vector values.

    value(x, y) = sum_t  sin(2 pi k_t.(x,y)) * sin_coeffs[t]
                       + cos(2 pi k_t.(x,y)) * cos_coeffs[t]
    where each coefficient row is an m-vector.
    """

    modes: np.ndarray       # (T, 2) integer wavevectors
    sin_coeffs: np.ndarray  # (T, m)
    cos_coeffs: np.ndarray  # (T, m)

    def __post_init__(self):
        object.__setattr__(self, "modes", np.atleast_2d(np.asarray(self.modes, dtype=int)))
        object.__setattr__(self, "sin_coeffs", np.atleast_2d(np.asarray(self.sin_coeffs, dtype=float)))
        object.__setattr__(self, "cos_coeffs", np.atleast_2d(np.asarray(self.cos_coeffs, dtype=float)))

    @property
    def dim(self) -> int:
        return self.sin_coeffs.shape[1]

    @staticmethod
    def zero(dim: int = 1) -> "Fourier2D":
        return Fourier2D(np.zeros((0, 2), dtype=int), np.zeros((0, dim)), np.zeros((0, dim)))

    @property
    def is_zero(self) -> bool:
        return self.modes.shape[0] == 0 or (
            not self.sin_coeffs.any() and not self.cos_coeffs.any()
        )

    def __call__(self, x, y) -> np.ndarray:
        """Evaluate; returns shape broadcast(x, y).shape + (m,)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        out = np.zeros(shape + (self.dim,))
        for (kx, ky), cs, cc in zip(self.modes, self.sin_coeffs, self.cos_coeffs):
            phase = TWO_PI * (kx * x + ky * y)
            out += np.sin(phase)[..., None] * cs + np.cos(phase)[..., None] * cc
        return out

    def gradient(self, x, y) -> np.ndarray:
        """Analytic gradient; returns shape + (m, 2)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        out = np.zeros(shape + (self.dim, 2))
        for (kx, ky), cs, cc in zip(self.modes, self.sin_coeffs, self.cos_coeffs):
            phase = TWO_PI * (kx * x + ky * y)
            dphase = np.stack([np.full(shape, TWO_PI * kx), np.full(shape, TWO_PI * ky)], axis=-1)
            ring = np.cos(phase)[..., None] * cs - np.sin(phase)[..., None] * cc  # d/dphase
            out += ring[..., :, None] * dphase[..., None, :]
        return out

    def compose_linear(self, L: IntMatrix) -> "Fourier2D":
        """Series of x -> value(L x): wavevectors transform by L^T."""
        Lt = np.array(L.rows, dtype=int).T
        return Fourier2D(self.modes @ Lt, self.sin_coeffs, self.cos_coeffs)

    def scaled(self, factor: float) -> "Fourier2D":
        return Fourier2D(self.modes, self.sin_coeffs * factor, self.cos_coeffs * factor)

    def to_json(self) -> list:
        return [
            {"k": [int(kx), int(ky)], "sin": list(map(float, cs)), "cos": list(map(float, cc))}
            for (kx, ky), cs, cc in zip(self.modes, self.sin_coeffs, self.cos_coeffs)
        ]

    @staticmethod
    def from_json(items: list, dim: int) -> "Fourier2D":
        if not items:
            return Fourier2D.zero(dim)
        modes = [it["k"] for it in items]
        sin_c = [it.get("sin", [0.0] * dim) for it in items]
        cos_c = [it.get("cos", [0.0] * dim) for it in items]
        return Fourier2D(np.array(modes), np.array(sin_c), np.array(cos_c))


def standard_sine_displacement(eps: float) -> Fourier2D:
    """The reference perturbation eps * (sin 2 pi x, sin 2 pi y) / (2 pi)."""
    amp = eps / TWO_PI
    return Fourier2D(
        modes=np.array([[1, 0], [0, 1]]),
        sin_coeffs=np.array([[amp, 0.0], [0.0, amp]]),
        cos_coeffs=np.zeros((2, 2)),
    )


class PeriodicSpline2D:
    """Periodic bicubic interpolation of an (N, N, m) node array on [0,1)^2."""

    def __init__(self, values: np.ndarray):
        self.values = np.asarray(values, dtype=float)
        self.n = self.values.shape[0]
        self._coeffs = [
            ndimage.spline_filter(self.values[..., k], order=3, mode="grid-wrap")
            for k in range(self.values.shape[-1])
        ]

    def __call__(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        coords = [np.broadcast_to(x * self.n, shape).ravel(),
                  np.broadcast_to(y * self.n, shape).ravel()]
        out = np.empty(shape + (len(self._coeffs),))
        for k, c in enumerate(self._coeffs):
            vals = ndimage.map_coordinates(c, coords, order=3, mode="grid-wrap", prefilter=False)
            out[..., k] = vals.reshape(shape)
        return out


@dataclass
class TorusMap:
    """Lift f(x) = linear.x + displacement(x) with periodic displacement."""

    linear: IntMatrix
    displacement: Fourier2D | None = None
    grid_displacement: np.ndarray | None = None  # alternative (N, N, 2) node values
    _spline: PeriodicSpline2D | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.displacement is None and self.grid_displacement is None:
            self.displacement = Fourier2D.zero(2)
        if self.grid_displacement is not None:
            self._spline = PeriodicSpline2D(np.asarray(self.grid_displacement, dtype=float))

    @property
    def is_linear(self) -> bool:
        return self.grid_displacement is None and self.displacement.is_zero

    def _disp(self, x, y) -> np.ndarray:
        if self._spline is not None:
            return self._spline(np.mod(x, 1.0), np.mod(y, 1.0))
        return self.displacement(x, y)

    def lift(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """Values of the lift at real coordinates (vectorized)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        (a, b), (c, d) = self.linear.rows
        disp = self._disp(x, y)
        return a * x + b * y + disp[..., 0], c * x + d * y + disp[..., 1]

    def __call__(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """The torus map itself: lift values mod 1."""
        X, Y = self.lift(x, y)
        return np.mod(X, 1.0), np.mod(Y, 1.0)

    def jacobian(self, x, y) -> np.ndarray:
        """Lift Jacobian, shape broadcast + (2, 2)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        J = np.zeros(shape + (2, 2))
        J[..., 0, 0], J[..., 0, 1] = self.linear[0, 0], self.linear[0, 1]
        J[..., 1, 0], J[..., 1, 1] = self.linear[1, 0], self.linear[1, 1]
        if self._spline is not None:
            h = 1e-6  # numeric gradient of the spline form
            dxp = self._disp(np.mod(x + h, 1.0), y); dxm = self._disp(np.mod(x - h, 1.0), y)
            dyp = self._disp(x, np.mod(y + h, 1.0)); dym = self._disp(x, np.mod(y - h, 1.0))
            J[..., :, 0] += (dxp - dxm) / (2 * h)
            J[..., :, 1] += (dyp - dym) / (2 * h)
        elif not self.displacement.is_zero:
            J += self.displacement.gradient(x, y)
        return J

    def inverse_lift(self, X, Y, tol: float = 1e-13, max_iter: int = 12) -> tuple[np.ndarray, np.ndarray]:
        """Newton solve of lift(w) = (X, Y), seeded from the linear inverse."""
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        Li = self.linear.inverse_unimodular()
        (ai, bi), (ci, di) = Li.rows
        wx = ai * X + bi * Y
        wy = ci * X + di * Y
        if self.is_linear:
            return wx, wy
        resid = np.inf
        for _ in range(max_iter):
            fx, fy = self.lift(wx, wy)
            rx, ry = fx - X, fy - Y
            resid = max(np.abs(rx).max(), np.abs(ry).max()) if rx.size else 0.0
            if resid < tol:
                return wx, wy
            J = self.jacobian(wx, wy)
            det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
            wx = wx - (J[..., 1, 1] * rx - J[..., 0, 1] * ry) / det
            wy = wy - (-J[..., 1, 0] * rx + J[..., 0, 0] * ry) / det
        fx, fy = self.lift(wx, wy)
        resid = max(np.abs(fx - X).max(), np.abs(fy - Y).max())
        if resid >= tol * 100:
            raise NewtonDiverged(f"inverse lift residual {resid:.3e}")
        return wx, wy

    def to_json(self) -> dict:
        out = {"linear": self.linear.to_json()}
        if self.grid_displacement is not None:
            out["grid_n"] = int(self.grid_displacement.shape[0])
        elif not self.displacement.is_zero:
            out["modes"] = self.displacement.to_json()
        return out


def linear_torus_map(M: IntMatrix) -> TorusMap:
    return TorusMap(M, Fourier2D.zero(2))


def perturbed_torus_map(M: IntMatrix, eps: float) -> TorusMap:
    """M plus the reference sine displacement of amplitude eps."""
    return TorusMap(M, standard_sine_displacement(eps))


def wrap_centered(v: np.ndarray) -> np.ndarray:
    """Componentwise representative in [-1/2, 1/2)."""
    return v - np.round(v)


def torus_dist(ax, ay, bx, by) -> np.ndarray:
    dx = wrap_centered(np.asarray(ax, dtype=float) - bx)
    dy = wrap_centered(np.asarray(ay, dtype=float) - by)
    return np.hypot(dx, dy)


@dataclass
class DisplacementField:
    """Grid-sampled periodic displacement u with h = id + u and u(0,0) = 0.

    Values live on the uniform N x N grid (i/N, j/N); evaluation between
    nodes uses periodic bicubic spline interpolation (node-exact).
    """

    grid: np.ndarray  # (N, N, 2)
    meta: dict = field(default_factory=dict)
    _spline: PeriodicSpline2D | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self._spline = PeriodicSpline2D(self.grid)

    @property
    def n(self) -> int:
        return self.grid.shape[0]

    @property
    def sup(self) -> float:
        return float(np.hypot(self.grid[..., 0], self.grid[..., 1]).max())

    def u(self, x, y) -> np.ndarray:
        return self._spline(np.mod(x, 1.0), np.mod(y, 1.0))

    def h(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """h = id + u evaluated at (possibly unreduced) coordinates."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        disp = self.u(x, y)
        return x + disp[..., 0], y + disp[..., 1]

    def h_inverse(self, X, Y, tol: float = 1e-12, max_iter: int = 40,
                  initial: tuple | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Newton inversion of h near the targets (PullbackFailed is the caller's call)."""
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if initial is not None:
            wx, wy = np.asarray(initial[0], dtype=float).copy(), np.asarray(initial[1], dtype=float).copy()
        else:
            wx, wy = X.copy(), Y.copy()
        eps = 1e-6
        for _ in range(max_iter):
            hx, hy = self.h(wx, wy)
            rx, ry = wrap_centered(hx - X), wrap_centered(hy - Y)
            resid = max(np.abs(rx).max(), np.abs(ry).max()) if rx.size else 0.0
            if resid < tol:
                return np.mod(wx, 1.0), np.mod(wy, 1.0)
            # numeric Jacobian of u; accuracy only affects the Newton rate
            up = self.u(wx + eps, wy); um = self.u(wx - eps, wy)
            vp = self.u(wx, wy + eps); vm = self.u(wx, wy - eps)
            j11 = 1.0 + (up[..., 0] - um[..., 0]) / (2 * eps)
            j21 = (up[..., 1] - um[..., 1]) / (2 * eps)
            j12 = (vp[..., 0] - vm[..., 0]) / (2 * eps)
            j22 = 1.0 + (vp[..., 1] - vm[..., 1]) / (2 * eps)
            det = j11 * j22 - j12 * j21
            wx = wx - (j22 * rx - j12 * ry) / det
            wy = wy - (-j21 * rx + j11 * ry) / det
        raise NewtonDiverged("displacement-field inversion did not converge")

    def save(self, stem: str | Path) -> None:
        """Write <stem>.csv (row-major u pairs) and <stem>.json (header)."""
        stem = Path(stem)
        n = self.n
        with open(stem.with_suffix(".csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["u1", "u2"])
            for i in range(n):
                for j in range(n):
                    writer.writerow([repr(float(self.grid[i, j, 0])), repr(float(self.grid[i, j, 1]))])
        header = {"N": n, **self.meta}
        with open(stem.with_suffix(".json"), "w") as fh:
            json.dump(header, fh, indent=2)

    @staticmethod
    def load(stem: str | Path) -> "DisplacementField":
        stem = Path(stem)
        with open(stem.with_suffix(".json")) as fh:
            header = json.load(fh)
        n = int(header.pop("N"))
        data = np.loadtxt(stem.with_suffix(".csv"), delimiter=",", skiprows=1)
        return DisplacementField(data.reshape(n, n, 2), meta=header)


def identity_field(n: int) -> DisplacementField:
    return DisplacementField(np.zeros((n, n, 2)))
