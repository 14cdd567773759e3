"""Rescaled logarithmic-potential solver and its small-eps limit extraction.

The unknown is w(x) = u(eps x) / |log eps| on a grid covering the interaction
profile; w satisfies

    w(x) = (tau / 2 pi) * integral of (-1 + log|x-z| / |log eps|) (w(z)+1) V(z) dz,

which is the eps-uniformly conditioned form of the fixed-point equation for
the potential u.  As eps -> 0 the solution flattens to -tau / (2 pi + tau).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .model import KernelSpec, MassFunctions, log_scale, tau as tau_of

__all__ = [
    "GridGeometry",
    "LogKernelWeights",
    "RescaledSystem",
    "PotentialGrid",
    "PotentialPoint",
    "ConvergenceReport",
    "log_box_integral",
    "assemble_rescaled_system",
    "solve_w",
    "lambda_eps",
    "effective_rate_factor",
    "limit_w_center",
    "limit_lambda",
    "limit_factor",
    "richardson_extrapolate",
    "verify_theorem_3_2",
]

TWO_PI = 2.0 * math.pi

DENSE_LIMIT = 64  # grids up to DENSE_LIMIT^2 nodes use a direct dense solve


def limit_w_center(tau: float) -> float:
    return -tau / (TWO_PI + tau)


def limit_lambda(tau: float) -> float:
    return tau / (TWO_PI + tau)


def limit_factor(tau: float) -> float:
    return TWO_PI / (TWO_PI + tau)


def _corner_antiderivative(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Oriented corner integral I(a, b) of log|y| over [0,a] x [0,b]."""
    a, b = np.broadcast_arrays(
        np.atleast_1d(np.asarray(a, dtype=np.float64)),
        np.atleast_1d(np.asarray(b, dtype=np.float64)),
    )
    sign = np.sign(a) * np.sign(b)
    aa = np.abs(a)
    bb = np.abs(b)
    out = np.zeros(aa.shape)
    m = (aa > 0.0) & (bb > 0.0)
    av = aa[m]
    bv = bb[m]
    r2 = av * av + bv * bv
    out[m] = 0.5 * (
        av * bv * np.log(r2)
        - 3.0 * av * bv
        + av * av * np.arctan(bv / av)
        + bv * bv * np.arctan(av / bv)
    )
    return sign * out


def log_box_integral(x1: float, x2: float, y1: float, y2: float) -> float:
    """Exact integral of log|y| over the rectangle [x1,x2] x [y1,y2]."""
    c = _corner_antiderivative
    return float((c(x2, y2) - c(x1, y2) - c(x2, y1) + c(x1, y1))[0])


@dataclass(frozen=True)
class GridGeometry:
    """Uniform cell-centred grid with n x n cells over [-R, R]^2."""

    n: int
    R: float

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("grid needs at least 2 cells per axis")
        if self.R <= 0.0:
            raise ValueError("R must be positive")

    @property
    def hq(self) -> float:
        return 2.0 * self.R / self.n

    def centers(self) -> np.ndarray:
        return -self.R + self.hq * (np.arange(self.n) + 0.5)

    def nodes(self) -> np.ndarray:
        c = self.centers()
        xx, yy = np.meshgrid(c, c)
        return np.column_stack([xx.ravel(), yy.ravel()])


class LogKernelWeights:
    """Cell integrals of log|x_a - z| for every node/cell offset.

    Every weight, the singular self-cell included, comes from the closed-form
    box integral, so the only quadrature error left in the assembled operator
    is the piecewise-constant approximation of the smooth factor.
    """

    def __init__(self, geometry: GridGeometry) -> None:
        self.geometry = geometry
        n = geometry.n
        hq = geometry.hq
        s = 0.5 * hq
        offs = hq * np.arange(-(n - 1), n)
        ox, oy = np.meshgrid(offs, offs)
        c = _corner_antiderivative
        self.table = (
            c(ox + s, oy + s) - c(ox - s, oy + s) - c(ox + s, oy - s) + c(ox - s, oy - s)
        )

    @property
    def self_cell(self) -> float:
        n = self.geometry.n
        return float(self.table[n - 1, n - 1])

    def self_cell_closed_form(self) -> float:
        """2 s^2 (log(2 s^2) - 3 + pi/2) for the cell half-width s."""
        s = 0.5 * self.geometry.hq
        return 2.0 * s * s * (math.log(2.0 * s * s) - 3.0 + 0.5 * math.pi)

    def apply(self, cell_values: np.ndarray) -> np.ndarray:
        """Return the (n, n) field a  ->  sum_b table[a - b] cell_values[b]."""
        return fftconvolve(cell_values, self.table, mode="valid")


@dataclass
class RescaledSystem:
    """Discretised fixed-point map w -> K (w + 1) on the grid."""

    geometry: GridGeometry
    tau: float
    eps: float
    v: np.ndarray  # (n, n) kernel values at the cell centres
    weights: LogKernelWeights

    def apply_K(self, w: np.ndarray) -> np.ndarray:
        """K u for the (n, n) field u (here u = w + 1)."""
        vu = self.v * w
        pref = self.tau / TWO_PI
        hq2 = self.geometry.hq ** 2
        log_part = self.weights.apply(vu) / log_scale(self.eps)
        return pref * (log_part - hq2 * vu.sum())

    def dense_matrix(self) -> np.ndarray:
        n = self.geometry.n
        idx = np.arange(n)
        iy, ix = [a.ravel() for a in np.meshgrid(idx, idx, indexing="ij")]
        dy = np.subtract.outer(iy, iy).astype(np.int32) + (n - 1)
        dx = np.subtract.outer(ix, ix).astype(np.int32) + (n - 1)
        K = self.weights.table[dy, dx]
        del dy, dx
        K /= log_scale(self.eps)
        K -= self.geometry.hq ** 2
        K *= (self.tau / TWO_PI) * self.v.ravel()[None, :]
        return K

    def residual(self, w: np.ndarray) -> float:
        return float(np.abs(w - self.apply_K(w + 1.0)).max())


@dataclass
class PotentialGrid:
    """Solved rescaled potential on the grid, with the solve residual."""

    geometry: GridGeometry
    w: np.ndarray
    eps: float
    tau: float
    residual: float
    v: np.ndarray | None = None  # kernel values on the grid, for evaluate()

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """w at arbitrary points through the integral representation.

        Exact in the off-grid variable; the only discretisation left is the
        per-cell constant value of (w + 1) V under the integral.
        """
        if self.v is None:
            raise ValueError("grid was built without kernel values")
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        geom = self.geometry
        s = 0.5 * geom.hq
        centers = geom.centers()
        u = (self.v * (self.w + 1.0)).ravel()
        c = _corner_antiderivative
        out = np.empty(pts.shape[0])
        nodes = geom.nodes()
        for k, p in enumerate(pts):
            ox = (p[0] - nodes[:, 0]).reshape(geom.n, geom.n)
            oy = (p[1] - nodes[:, 1]).reshape(geom.n, geom.n)
            W = c(ox + s, oy + s) - c(ox - s, oy + s) - c(ox + s, oy - s) + c(ox - s, oy - s)
            out[k] = (self.tau / TWO_PI) * float(
                np.dot(W.ravel() / log_scale(self.eps) - geom.hq ** 2, u)
            )
        return out

    def center_value(self) -> float:
        """w(0) through the integral representation."""
        return float(self.evaluate(np.zeros((1, 2)))[0])

    def sup_error(self, radius: float) -> float:
        nodes = self.geometry.nodes()
        inside = (nodes[:, 0] ** 2 + nodes[:, 1] ** 2) <= radius * radius
        target = limit_w_center(self.tau)
        return float(np.abs(self.w.ravel()[inside] - target).max())


def assemble_rescaled_system(
    ks: KernelSpec,
    tau: float,
    eps: float,
    geometry: GridGeometry | None = None,
    weights: LogKernelWeights | None = None,
) -> RescaledSystem:
    """Discretise the rescaled fixed-point equation on a grid covering supp V."""
    if tau < 0.0:
        raise ValueError("tau must be nonnegative")
    if geometry is None:
        geometry = GridGeometry(n=64, R=ks.R0)
    if geometry.R < ks.R0:
        raise ValueError("grid must cover the support of V")
    cells_across = 2.0 * ks.R0 / geometry.hq
    if cells_across < 32.0:
        raise ValueError(
            f"grid too coarse: only {cells_across:.0f} cells across supp V (need >= 32)"
        )
    if weights is None:
        weights = LogKernelWeights(geometry)
    elif weights.geometry != geometry:
        raise ValueError("weights were built for a different grid")
    n = geometry.n
    v = ks.V(geometry.nodes()).reshape(n, n)
    return RescaledSystem(geometry=geometry, tau=tau, eps=eps, v=v, weights=weights)


def solve_w(system: RescaledSystem, tol: float = 1e-10, dense: bool | None = None) -> PotentialGrid:
    """Solve (I - K) w = K 1; dense up to 64^2 nodes, matrix-free GMRES beyond."""
    n = system.geometry.n
    ones = np.ones((n, n))
    rhs = system.apply_K(ones)
    if dense is None:
        dense = n <= DENSE_LIMIT
    if dense:
        A = system.dense_matrix()
        np.negative(A, out=A)
        A[np.diag_indices_from(A)] += 1.0
        w = np.linalg.solve(A, rhs.ravel()).reshape(n, n)
    else:
        from scipy.sparse.linalg import LinearOperator, gmres

        size = n * n

        def matvec(u: np.ndarray) -> np.ndarray:
            field = u.reshape(n, n)
            return (field - system.apply_K(field)).ravel()

        op = LinearOperator((size, size), matvec=matvec)
        w_flat, info = gmres(op, rhs.ravel(), rtol=1e-13, atol=0.0, maxiter=400)
        if info != 0:
            raise RuntimeError(f"gmres failed to converge (info={info})")
        w = w_flat.reshape(n, n)
    res = system.residual(w)
    if res > tol:
        raise RuntimeError(f"fixed-point residual {res:.3e} exceeds {tol:.1e}")
    return PotentialGrid(
        geometry=system.geometry, w=w, eps=system.eps, tau=system.tau, residual=res, v=system.v
    )


def lambda_eps(grid: PotentialGrid, ks: KernelSpec, tau: float | None = None) -> float:
    """Total mass of the potential-defining measure: (tau/2pi) integral (w+1) V."""
    if tau is None:
        tau = grid.tau
    v = ks.V(grid.geometry.nodes()).reshape(grid.w.shape)
    return float(tau / TWO_PI * grid.geometry.hq ** 2 * np.sum(v * (grid.w + 1.0)))


def effective_rate_factor(grid: PotentialGrid, ks: KernelSpec) -> float:
    """V-weighted mean of w + 1 over supp V; the alpha -> beta conversion factor."""
    v = ks.V(grid.geometry.nodes()).reshape(grid.w.shape)
    return float(np.sum(v * (grid.w + 1.0)) / np.sum(v))


def richardson_extrapolate(s: np.ndarray, values: np.ndarray, order: int = 2) -> float:
    """Extrapolate values(s) to s = 0 by a degree-``order`` fit in s.

    ``s`` is the small parameter (here 1/|log eps|); uses the ``order + 1``
    smallest s points.
    """
    s = np.asarray(s, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if s.size < order + 1:
        raise ValueError(f"need at least {order + 1} points for order {order}")
    pick = np.argsort(s)[: order + 1]
    coeffs = np.polyfit(s[pick], values[pick], order)
    return float(np.polyval(coeffs, 0.0))


@dataclass(frozen=True)
class PotentialPoint:
    """One (tau, eps) solve of the rescaled equation."""

    tau: float
    eps: float
    log_eps: float
    sup_error: float
    lambda_eps: float
    factor: float
    w_center: float
    residual: float


@dataclass(frozen=True)
class ConvergenceReport:
    """Sweep of one tau across an eps ladder, with the extrapolated limits."""

    tau: float
    k_radius: float
    points: tuple[PotentialPoint, ...]
    fit_c: float
    fit_r2: float
    w_center_limit: float
    lambda_limit: float
    factor_limit: float

    @property
    def expected_w(self) -> float:
        return limit_w_center(self.tau)

    @property
    def expected_lambda(self) -> float:
        return limit_lambda(self.tau)


def verify_theorem_3_2(
    ks: KernelSpec,
    tau: float,
    eps_list: tuple[float, ...] = (1e-3, 1e-6, 1e-9, 1e-12),
    k_radius: float = 1.0,
    grid_n: int = 64,
) -> ConvergenceReport:
    """Solve across the eps ladder, fit sup-error ~ c/|log eps|, extrapolate."""
    geometry = GridGeometry(n=grid_n, R=max(ks.R0, k_radius))
    weights = LogKernelWeights(geometry)
    points = []
    for eps in sorted(eps_list, reverse=True):
        system = assemble_rescaled_system(ks, tau, eps, geometry, weights)
        grid = solve_w(system)
        points.append(
            PotentialPoint(
                tau=tau,
                eps=eps,
                log_eps=log_scale(eps),
                sup_error=grid.sup_error(k_radius),
                lambda_eps=lambda_eps(grid, ks),
                factor=effective_rate_factor(grid, ks),
                w_center=grid.center_value(),
                residual=grid.residual,
            )
        )
    s = np.array([1.0 / p.log_eps for p in points])
    e = np.array([p.sup_error for p in points])
    denom = float(np.sum(s * s))
    fit_c = float(np.sum(e * s) / denom) if denom > 0 else 0.0
    ss_res = float(np.sum((e - fit_c * s) ** 2))
    ss_tot = float(np.sum((e - e.mean()) ** 2))
    fit_r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    order = min(2, len(points) - 1)
    return ConvergenceReport(
        tau=tau,
        k_radius=k_radius,
        points=tuple(points),
        fit_c=fit_c,
        fit_r2=fit_r2,
        w_center_limit=richardson_extrapolate(s, [p.w_center for p in points], order),
        lambda_limit=richardson_extrapolate(s, [p.lambda_eps for p in points], order),
        factor_limit=richardson_extrapolate(s, [p.factor for p in points], order),
    )


def factor_for_masses(
    ks: KernelSpec,
    mf: MassFunctions,
    n: int,
    m: int,
    eps_list: tuple[float, ...] = (1e-3, 1e-6, 1e-9, 1e-12),
    grid_n: int = 64,
) -> tuple[float, float]:
    """Extrapolated rate factor for a mass pair and the implied beta estimate."""
    t = tau_of(n, m, mf)
    report = verify_theorem_3_2(ks, t, eps_list=eps_list, grid_n=grid_n)
    return report.factor_limit, mf.alpha(n, m) * report.factor_limit
