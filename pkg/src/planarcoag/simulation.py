"""Microscopic dynamics: Brownian motion with range-eps pair coagulation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import (
    Configuration,
    InitialData,
    KernelSpec,
    MassFunctions,
    MollifierSpec,
    Particle,
    log_scale,
    sample_initial_configuration,
    validate_hypothesis,
)

__all__ = [
    "SimConfig",
    "CellIndex",
    "Event",
    "EmpiricalMeasure",
    "StossTracking",
    "RunResult",
    "build_cell_index",
    "brownian_step",
    "pair_rate",
    "coagulate",
    "step",
    "empirical_measure",
    "integrate_test_function",
    "q_functional",
    "stosszahlansatz_rhs",
    "run",
]


@dataclass(frozen=True)
class SimConfig:
    """Time stepping and scale parameters for one trajectory.

    ``rate_point`` picks where the pair rate is evaluated within a substep:
    the exact Brownian-bridge midpoint (default; quadrature error O(dt^2) per
    substep for the hazard integral) or the post-move endpoint (O(dt), kept
    for bias studies).  Both coincide when diffusion is frozen.
    """

    dt: float
    horizon: float
    eps: float
    rate_cap: float = 0.1
    seed: int = 0
    variant: str = "standard"
    rate_point: str = "midpoint"

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.horizon < 0.0:
            raise ValueError("horizon must be nonnegative")
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        if not 0.0 < self.rate_cap < 1.0:
            raise ValueError("rate_cap must lie in (0, 1)")
        if self.variant not in ("standard", "mass_radius"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.rate_point not in ("midpoint", "endpoint"):
            raise ValueError(f"unknown rate_point {self.rate_point!r}")


@dataclass(frozen=True)
class Event:
    """One coagulation: ordered pair (i, j) merged, position kept from i or j."""

    time: float
    i: int
    j: int
    m_i: int
    m_j: int
    kept: str


# ---------------------------------------------------------------------------
# cell-list neighbour search
# ---------------------------------------------------------------------------

# Half shell of neighbour offsets; together with same-cell pairs this
# enumerates every unordered adjacent-cell pair exactly once.
_HALF_OFFSETS = ((0, 1), (1, -1), (1, 0), (1, 1))


class CellIndex:
    """Uniform bucket grid over the live particles of a configuration.

    Cell side equals the interaction diameter, so every pair within range
    shares a cell or lies in adjacent cells.  Keys encode (cx, cy) as
    cx * stride + cy with stride two larger than the occupied cy range, which
    keeps neighbour-offset arithmetic alias-free.
    """

    def __init__(self, cfg: Configuration, cell_size: float) -> None:
        if cell_size <= 0.0:
            raise ValueError("cell size must be positive")
        self.cell_size = float(cell_size)
        live = cfg.live_indices()
        pts = cfg.positions[live]
        self.indices = live
        self.points = pts
        n = live.shape[0]
        if n == 0:
            self._keys = np.empty(0, dtype=np.int64)
            self._order = np.empty(0, dtype=np.int64)
            self._uniq = np.empty(0, dtype=np.int64)
            self._starts = np.empty(0, dtype=np.int64)
            self._counts = np.empty(0, dtype=np.int64)
            self.stride = 2
            return
        cells = np.floor(pts / self.cell_size).astype(np.int64)
        cells -= cells.min(axis=0)
        stride = int(cells[:, 1].max()) + 2
        keys = cells[:, 0] * stride + cells[:, 1]
        order = np.argsort(keys, kind="stable")
        self._order = order
        self._keys = keys[order]
        self.stride = stride
        self._uniq, self._starts, self._counts = _runs(self._keys)

    def candidate_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """All unordered pairs sharing a cell or sitting in adjacent cells.

        Returns local row indices into ``self.points``; map through
        ``self.indices`` for configuration indices.
        """
        if self.indices.shape[0] < 2:
            e = np.empty(0, dtype=np.int64)
            return e, e
        parts_p = []
        parts_q = []
        p, q = _cross_pairs(self._starts, self._counts, self._starts, self._counts)
        keep = p < q
        parts_p.append(p[keep])
        parts_q.append(q[keep])
        for dx, dy in _HALF_OFFSETS:
            off = dx * self.stride + dy
            target = self._uniq + off
            pos = np.searchsorted(self._uniq, target)
            pos[pos >= self._uniq.shape[0]] = 0
            ok = self._uniq[pos] == target
            if not np.any(ok):
                continue
            p, q = _cross_pairs(
                self._starts[ok], self._counts[ok], self._starts[pos[ok]], self._counts[pos[ok]]
            )
            parts_p.append(p)
            parts_q.append(q)
        p = self._order[np.concatenate(parts_p)]
        q = self._order[np.concatenate(parts_q)]
        return p, q

    def pairs_within(self, diameter: float) -> tuple[np.ndarray, np.ndarray]:
        """Unordered candidate pairs filtered to |x_p - x_q| < diameter."""
        if diameter > self.cell_size * (1.0 + 1e-12):
            raise ValueError("query diameter exceeds the cell size")
        p, q = self.candidate_pairs()
        if p.size == 0:
            return p, q
        d = self.points[p] - self.points[q]
        keep = d[:, 0] ** 2 + d[:, 1] ** 2 < diameter * diameter
        return p[keep], q[keep]


def _runs(sorted_keys: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    uniq, starts, counts = np.unique(sorted_keys, return_index=True, return_counts=True)
    return uniq, starts.astype(np.int64), counts.astype(np.int64)


def _cross_pairs(
    starts_a: np.ndarray, counts_a: np.ndarray, starts_b: np.ndarray, counts_b: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Ragged cross product: all (p, q) with p in run a_k, q in run b_k."""
    sizes = counts_a * counts_b
    total = int(sizes.sum())
    if total == 0:
        e = np.empty(0, dtype=np.int64)
        return e, e
    block = np.repeat(np.arange(sizes.shape[0]), sizes)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    local = np.arange(total, dtype=np.int64) - offsets[block]
    p = starts_a[block] + local // counts_b[block]
    q = starts_b[block] + local % counts_b[block]
    return p, q


def build_cell_index(cfg: Configuration, interaction_diameter: float) -> CellIndex:
    """Bucket the live particles with cell side equal to the interaction diameter."""
    return CellIndex(cfg, interaction_diameter)


# ---------------------------------------------------------------------------
# rates
# ---------------------------------------------------------------------------


def _half_scale_fn(ks: KernelSpec, variant: str) -> Callable[[int], float]:
    """Per-mass radius r(m); a pair interacts over range (r(m_i)+r(m_j)) * eps.

    The standard variant is the constant-radius case r = 1/2, for which the
    pair scale r_i + r_j is identically one and the rate reduces to
    eps^-2 |log eps|^-1 V(. / eps) alpha.
    """
    if variant != "mass_radius":
        return lambda m: 0.5
    if ks.radius_fn is not None:
        return ks.radius_fn
    return lambda m: math.sqrt(m)


def pair_rate(
    p_i: Particle,
    p_j: Particle,
    eps: float,
    ks: KernelSpec,
    mf: MassFunctions,
    variant: str = "standard",
) -> float:
    """Coagulation rate of the ordered pair (i, j).

    Standard variant: eps^-2 |log eps|^-1 V((x_i-x_j)/eps) alpha(m_i, m_j).
    Mass-radius variant: V is replaced by s^-2 V(. / s) with
    s = r(m_i) + r(m_j), widening the range to s * eps.
    """
    pref = 1.0 / (eps * eps * log_scale(eps))
    dx = np.array([[p_i.position[0] - p_j.position[0], p_i.position[1] - p_j.position[1]]])
    r = _half_scale_fn(ks, variant)
    s = r(p_i.mass) + r(p_j.mass)
    v = float(ks.V(dx / (eps * s))[0]) / (s * s)
    return pref * v * mf.alpha(p_i.mass, p_j.mass)


class _MassTables:
    """Lazily grown per-mass lookup tables for the hot loop."""

    def __init__(self, mf: MassFunctions, ks: KernelSpec, variant: str) -> None:
        self._mf = mf
        self._radius = _half_scale_fn(ks, variant)
        self.d = np.empty(0, dtype=np.float64)
        self.alpha = np.empty((0, 0), dtype=np.float64)
        self.r = np.empty(0, dtype=np.float64)

    def ensure(self, n_max: int) -> None:
        have = self.d.shape[0]
        if n_max <= have:
            return
        self.d = np.array([self._mf.d(n) for n in range(1, n_max + 1)])
        self.r = np.array([self._radius(n) for n in range(1, n_max + 1)])
        alpha = np.empty((n_max, n_max), dtype=np.float64)
        for n in range(1, n_max + 1):
            for m in range(1, n_max + 1):
                alpha[n - 1, m - 1] = self._mf.alpha(n, m)
        self.alpha = alpha


def _rate_bound(tables: _MassTables, masses_present: np.ndarray, pref: float, v_max: float) -> float:
    """Position-free upper bound on any ordered pair rate for the present masses."""
    ms = masses_present - 1
    a = tables.alpha[np.ix_(ms, ms)]
    s = tables.r[ms][:, None] + tables.r[ms][None, :]
    return pref * v_max * float((a / (s * s)).max(initial=0.0))


# ---------------------------------------------------------------------------
# elementary moves
# ---------------------------------------------------------------------------


def brownian_step(
    cfg: Configuration, dt: float, mf: MassFunctions, rng: np.random.Generator
) -> Configuration:
    """Displace every particle by an independent Gaussian with per-coordinate
    variance 2 d(m) dt; masses and indices are untouched."""
    if dt < 0.0:
        raise ValueError("dt must be nonnegative")
    out = cfg.copy()
    if dt > 0.0:
        _diffuse_inplace(out, dt, mf, rng)
        out.time = cfg.time + dt
    return out


def _diffuse_inplace(
    cfg: Configuration, dt: float, mf: MassFunctions, rng: np.random.Generator,
    tables: _MassTables | None = None,
) -> None:
    live = cfg.live_indices()
    if live.size == 0:
        return
    masses = cfg.masses[live]
    if tables is None:
        d_vals = np.array([mf.d(int(m)) for m in np.unique(masses)])
        lookup = dict(zip(np.unique(masses), d_vals))
        d_of = np.array([lookup[m] for m in masses])
    else:
        d_of = tables.d[masses - 1]
    scale = np.sqrt(2.0 * d_of * dt)
    cfg.positions[live] += rng.standard_normal((live.size, 2)) * scale[:, None]


def _bridge_midpoints(
    cfg: Configuration,
    old_positions: np.ndarray,
    dt: float,
    rng: np.random.Generator,
    tables: _MassTables,
) -> np.ndarray:
    """Exact bridge midpoints for the live particles over the last substep.

    Conditional on the endpoints, the midpoint of a Brownian path with
    per-coordinate variance rate 2 d(m) is the average of the endpoints plus
    an independent N(0, d(m) dt / 2) fluctuation.
    """
    live = cfg.live_indices()
    mid = np.array(cfg.positions, copy=True)
    d_of = tables.d[cfg.masses[live] - 1]
    scale = np.sqrt(0.5 * d_of * dt)
    mid[live] = 0.5 * (old_positions[live] + cfg.positions[live])
    mid[live] += rng.standard_normal((live.size, 2)) * scale[:, None]
    return mid


def coagulate(
    cfg: Configuration, i: int, j: int, rng: np.random.Generator
) -> Configuration:
    """Merge particles i and j into one of mass m_i + m_j placed at x_i with
    probability m_i / (m_i + m_j), else at x_j."""
    out = cfg.copy()
    _merge_inplace(out, i, j, keep_i=bool(rng.random() < cfg.masses[i] / (cfg.masses[i] + cfg.masses[j])))
    return out


def _merge_inplace(cfg: Configuration, i: int, j: int, keep_i: bool) -> int:
    if i == j:
        raise ValueError("cannot coagulate a particle with itself")
    if not (cfg.alive[i] and cfg.alive[j]):
        raise KeyError(f"both particles must be alive, got ({i}, {j})")
    mass = int(cfg.masses[i] + cfg.masses[j])
    pos = cfg.positions[i] if keep_i else cfg.positions[j]
    cfg._kill(i)
    cfg._kill(j)
    return cfg._append(pos.copy(), mass)


# ---------------------------------------------------------------------------
# the combined step
# ---------------------------------------------------------------------------


def step(
    cfg: Configuration,
    sim: SimConfig,
    ks: KernelSpec,
    mf: MassFunctions,
    rng: np.random.Generator,
) -> tuple[Configuration, list[Event]]:
    """Advance one slice of length sim.dt: diffusion plus thinned coagulation.

    The slice is internally subdivided so that no ordered pair's firing
    probability exceeds sim.rate_cap within a substep.
    """
    out = cfg.copy()
    tables = _MassTables(mf, ks, sim.variant)
    events = _advance(out, sim, ks, mf, sim.dt, rng, tables)
    return out, events


def _advance(
    cfg: Configuration,
    sim: SimConfig,
    ks: KernelSpec,
    mf: MassFunctions,
    dt: float,
    rng: np.random.Generator,
    tables: _MassTables,
    tracker: "_StossAccumulator | None" = None,
) -> list[Event]:
    """Advance cfg in place by dt.  Mutates cfg; returns new events."""
    eps = sim.eps
    pref = 1.0 / (eps * eps * log_scale(eps))
    events: list[Event] = []
    if cfg.count == 0 or dt == 0.0:
        cfg.time += dt
        return events

    tables.ensure(int(cfg.masses[cfg.alive].max()))
    present = np.unique(cfg.masses[cfg.alive])
    lam_bound = _rate_bound(tables, present, pref, ks.v_max)
    r_max = float(tables.r[present - 1].max())

    midpoint = sim.rate_point == "midpoint"
    d_max = float(tables.d[present - 1].max())
    t_start = cfg.time
    done = 0.0
    while done < dt - 1e-12 * dt:
        dt_sub = dt - done
        if lam_bound * dt_sub > sim.rate_cap:
            dt_sub = sim.rate_cap / lam_bound
        if midpoint:
            old_positions = np.array(cfg.positions, copy=True)
        _diffuse_inplace(cfg, dt_sub, mf, rng, tables)
        done = min(dt, done + dt_sub)
        cfg.time = t_start + done

        diameter = ks.R0 * eps * (2.0 * r_max)
        if midpoint:
            # midpoints can stray from the endpoints; widen the candidate search
            where = _bridge_midpoints(cfg, old_positions, dt_sub, rng, tables)
            search = diameter + 6.0 * math.sqrt(2.0 * d_max * dt_sub)
        else:
            where = cfg.positions
            search = diameter
        index = CellIndex(cfg, search)
        p, q = index.pairs_within(search)
        n_fired = 0
        if p.size:
            gi = index.indices[p]
            gj = index.indices[q]
            mi = cfg.masses[gi]
            mj = cfg.masses[gj]
            dx = where[gi] - where[gj]
            s = tables.r[mi - 1] + tables.r[mj - 1]
            v = ks.V(dx / (eps * s[:, None])) / (s * s)
            lam_ij = pref * v * tables.alpha[mi - 1, mj - 1]
            lam_ji = pref * v * tables.alpha[mj - 1, mi - 1]
            if tracker is not None:
                tracker.add_rates(cfg, gi, gj, lam_ij, lam_ji, dt_sub)
            u = rng.random((2, p.size))
            hot_ij = u[0] < -np.expm1(-lam_ij * dt_sub)
            hot_ji = u[1] < -np.expm1(-lam_ji * dt_sub)
            fired_i = np.concatenate([gi[hot_ij], gj[hot_ji]])
            fired_j = np.concatenate([gj[hot_ij], gi[hot_ji]])
            n_fired = fired_i.shape[0]
        if n_fired:
            order = rng.permutation(n_fired) if n_fired > 1 else np.array([0])
            for k in order:
                i = int(fired_i[k])
                j = int(fired_j[k])
                if not (cfg.alive[i] and cfg.alive[j]):
                    continue
                m_i = int(cfg.masses[i])
                m_j = int(cfg.masses[j])
                keep_i = bool(rng.random() < m_i / (m_i + m_j))
                _merge_inplace(cfg, i, j, keep_i)
                events.append(
                    Event(time=cfg.time, i=i, j=j, m_i=m_i, m_j=m_j, kept="i" if keep_i else "j")
                )
            if cfg.count == 0:
                break
            # merged masses may enlarge the rate bound
            tables.ensure(int(cfg.masses[cfg.alive].max()))
            present = np.unique(cfg.masses[cfg.alive])
            lam_bound = _rate_bound(tables, present, pref, ks.v_max)
            r_max = float(tables.r[present - 1].max())
            d_max = float(tables.d[present - 1].max())
        if tracker is not None:
            tracker.on_time(cfg)
    cfg.time = t_start + dt
    return events


# ---------------------------------------------------------------------------
# empirical measures and pair functionals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Per-mass point clouds, each point carrying weight 1/|log eps|."""

    eps: float
    time: float
    points: dict[int, np.ndarray]

    @property
    def weight(self) -> float:
        return 1.0 / log_scale(self.eps)

    def count(self, n: int) -> int:
        pts = self.points.get(n)
        return 0 if pts is None else pts.shape[0]

    def total(self, n: int) -> float:
        """Mass of the n-component, i.e. the integral of 1 against it."""
        return self.count(n) * self.weight


def empirical_measure(cfg: Configuration, eps: float) -> EmpiricalMeasure:
    live = cfg.live_indices()
    masses = cfg.masses[live]
    points: dict[int, np.ndarray] = {}
    for n in np.unique(masses):
        points[int(n)] = cfg.positions[live[masses == n]].copy()
    return EmpiricalMeasure(eps=eps, time=cfg.time, points=points)


def integrate_test_function(
    em: EmpiricalMeasure, J: Callable[[np.ndarray], np.ndarray], n: int
) -> float:
    """|log eps|^-1 sum of J over the mass-n particle positions."""
    pts = em.points.get(n)
    if pts is None or pts.shape[0] == 0:
        return 0.0
    return float(np.sum(J(pts))) * em.weight


def q_functional(
    cfg: Configuration,
    eps: float,
    J: Callable[[np.ndarray], np.ndarray],
    Jbar: Callable[[np.ndarray], np.ndarray],
    m1: int,
    m2: int,
    ks: KernelSpec,
    mf: MassFunctions,
) -> float:
    """Pair collision propensity weighted by the two test functions.

    |log eps|^-2 sum over ordered in-range pairs of
    alpha(m_i, m_j) V_eps(x_i - x_j) J(x_i) Jbar(x_j) restricted to
    (m_i, m_j) = (m1, m2).
    """
    scale = log_scale(eps)
    pref = 1.0 / (eps * eps * scale)
    diameter = ks.R0 * eps
    index = CellIndex(cfg, diameter)
    p, q = index.pairs_within(diameter)
    if p.size == 0:
        return 0.0
    gi = index.indices[p]
    gj = index.indices[q]
    mi = cfg.masses[gi]
    mj = cfg.masses[gj]
    v = ks.V((cfg.positions[gi] - cfg.positions[gj]) / eps)
    total = 0.0
    for a, b in ((gi, gj), (gj, gi)):
        mask = (cfg.masses[a] == m1) & (cfg.masses[b] == m2) & (v > 0.0)
        if np.any(mask):
            lam = pref * v[mask] * np.array(
                [mf.alpha(int(x), int(y)) for x, y in zip(cfg.masses[a][mask], cfg.masses[b][mask])]
            )
            total += float(
                np.sum(lam * J(cfg.positions[a][mask]) * Jbar(cfg.positions[b][mask]))
            )
    return total / (scale * scale)


def mollified_density(
    points: np.ndarray,
    weight: float,
    mol: MollifierSpec,
    grid_x: np.ndarray,
    grid_y: np.ndarray,
) -> np.ndarray:
    """Evaluate weight * sum_i delta^-2 eta((x_i - w)/delta) on a uniform grid."""
    nx = grid_x.shape[0]
    ny = grid_y.shape[0]
    out = np.zeros((ny, nx), dtype=np.float64)
    if points.shape[0] == 0:
        return out
    h = grid_x[1] - grid_x[0] if nx > 1 else mol.delta
    reach = mol.delta * mol.support_radius
    half = int(math.ceil(reach / h)) + 1
    offs = np.arange(-half, half + 1)
    ox, oy = np.meshgrid(offs, offs)
    base_x = np.rint((points[:, 0] - grid_x[0]) / h).astype(np.int64)
    base_y = np.rint((points[:, 1] - grid_y[0]) / h).astype(np.int64)
    ix = base_x[:, None, None] + ox[None]
    iy = base_y[:, None, None] + oy[None]
    good = (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)
    wx = grid_x[np.clip(ix, 0, nx - 1)] - points[:, 0, None, None]
    wy = grid_y[np.clip(iy, 0, ny - 1)] - points[:, 1, None, None]
    u = np.stack([wx.ravel(), wy.ravel()], axis=1) / mol.delta
    vals = mol.eta(u).reshape(wx.shape) / (mol.delta**2)
    vals = np.where(good, vals, 0.0)
    np.add.at(out, (np.clip(iy, 0, ny - 1), np.clip(ix, 0, nx - 1)), vals)
    return out * weight


def stosszahlansatz_rhs(
    em: EmpiricalMeasure,
    mol: MollifierSpec,
    J: Callable[[np.ndarray], np.ndarray],
    Jbar: Callable[[np.ndarray], np.ndarray],
    m1: int,
    m2: int,
    beta_value: float,
    cells_per_delta: int = 8,
) -> float:
    """Mean-field pair propensity: beta * integral of J Jbar times the product
    of the delta-mollified mass-m1 and mass-m2 empirical densities."""
    if cells_per_delta < 8:
        raise ValueError("quadrature grid must resolve delta with >= 8 cells")
    pts1 = em.points.get(m1, np.empty((0, 2)))
    pts2 = em.points.get(m2, np.empty((0, 2)))
    if pts1.shape[0] == 0 or pts2.shape[0] == 0 or beta_value == 0.0:
        return 0.0
    h = mol.delta / cells_per_delta
    reach = mol.delta * mol.support_radius + h
    allpts = np.concatenate([pts1, pts2])
    lo = allpts.min(axis=0) - reach
    hi = allpts.max(axis=0) + reach
    grid_x = np.arange(lo[0], hi[0] + h, h)
    grid_y = np.arange(lo[1], hi[1] + h, h)
    rho1 = mollified_density(pts1, em.weight, mol, grid_x, grid_y)
    rho2 = mollified_density(pts2, em.weight, mol, grid_x, grid_y)
    xx, yy = np.meshgrid(grid_x, grid_y)
    w = np.column_stack([xx.ravel(), yy.ravel()])
    jj = (J(w) * Jbar(w)).reshape(xx.shape)
    return float(beta_value * h * h * np.sum(jj * rho1 * rho2))


# ---------------------------------------------------------------------------
# whole-trajectory driver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StossTracking:
    """Request on-line collision-propensity diagnostics along a run."""

    J: Callable[[np.ndarray], np.ndarray]
    Jbar: Callable[[np.ndarray], np.ndarray]
    m1: int
    m2: int
    beta_value: float
    mollifiers: tuple[MollifierSpec, ...]
    diag_interval: float
    cells_per_delta: int = 8


class _StossAccumulator:
    def __init__(self, tracking: StossTracking, eps: float) -> None:
        self.tr = tracking
        self.eps = eps
        self.scale = log_scale(eps)
        self.q_integral = 0.0
        self.q_series: list[tuple[float, float]] = []
        self.rhs_last = [0.0] * len(tracking.mollifiers)
        self.rhs_time = 0.0
        self.rhs_integral = [0.0] * len(tracking.mollifiers)
        self.rhs_series: list[list[tuple[float, float]]] = [[] for _ in tracking.mollifiers]
        self.next_t = 0.0

    def start(self, cfg: Configuration) -> None:
        self.rhs_time = cfg.time
        self._sample(cfg)
        self.next_t = cfg.time + self.tr.diag_interval

    def add_rates(
        self,
        cfg: Configuration,
        gi: np.ndarray,
        gj: np.ndarray,
        lam_ij: np.ndarray,
        lam_ji: np.ndarray,
        dt_sub: float,
    ) -> None:
        mi = cfg.masses[gi]
        mj = cfg.masses[gj]
        q = 0.0
        mask = (mi == self.tr.m1) & (mj == self.tr.m2)
        if np.any(mask):
            q += float(
                np.sum(
                    lam_ij[mask]
                    * self.tr.J(cfg.positions[gi[mask]])
                    * self.tr.Jbar(cfg.positions[gj[mask]])
                )
            )
        mask = (mj == self.tr.m1) & (mi == self.tr.m2)
        if np.any(mask):
            q += float(
                np.sum(
                    lam_ji[mask]
                    * self.tr.J(cfg.positions[gj[mask]])
                    * self.tr.Jbar(cfg.positions[gi[mask]])
                )
            )
        self.q_integral += q * dt_sub / (self.scale * self.scale)

    def on_time(self, cfg: Configuration) -> None:
        if cfg.time + 1e-12 >= self.next_t:
            self._advance_rhs(cfg)
            self.next_t += self.tr.diag_interval

    def finish(self, cfg: Configuration) -> None:
        if cfg.time > self.rhs_time + 1e-12:
            self._advance_rhs(cfg)

    def _advance_rhs(self, cfg: Configuration) -> None:
        em = empirical_measure(cfg, self.eps)
        dt = cfg.time - self.rhs_time
        for k, mol in enumerate(self.tr.mollifiers):
            val = stosszahlansatz_rhs(
                em, mol, self.tr.J, self.tr.Jbar, self.tr.m1, self.tr.m2,
                self.tr.beta_value, self.tr.cells_per_delta,
            )
            self.rhs_integral[k] += 0.5 * (val + self.rhs_last[k]) * dt
            self.rhs_last[k] = val
            self.rhs_series[k].append((cfg.time, val))
        self.rhs_time = cfg.time
        self.q_series.append((cfg.time, self.q_integral))

    def _sample(self, cfg: Configuration) -> None:
        em = empirical_measure(cfg, self.eps)
        for k, mol in enumerate(self.tr.mollifiers):
            self.rhs_last[k] = stosszahlansatz_rhs(
                em, mol, self.tr.J, self.tr.Jbar, self.tr.m1, self.tr.m2,
                self.tr.beta_value, self.tr.cells_per_delta,
            )
            self.rhs_series[k].append((cfg.time, self.rhs_last[k]))
        self.q_series.append((cfg.time, self.q_integral))


@dataclass
class RunResult:
    """Everything recorded along one seeded trajectory."""

    seed: int
    eps: float
    n_initial: int
    snapshot_times: tuple[float, ...]
    snapshots: list[EmpiricalMeasure]
    events: list[Event]
    final: Configuration
    q_integral: float | None = None
    q_series: list[tuple[float, float]] | None = None
    rhs_integrals: list[float] | None = None
    rhs_series: list[list[tuple[float, float]]] | None = None

    @property
    def counts(self) -> list[int]:
        return [sum(em.count(n) for n in em.points) for em in self.snapshots]


def run(
    sim: SimConfig,
    initial: InitialData,
    ks: KernelSpec,
    mf: MassFunctions,
    snapshot_times: Sequence[float],
    tracking: StossTracking | None = None,
    validate: bool = True,
    validate_up_to: int = 12,
) -> RunResult:
    """Simulate one seeded trajectory and record snapshots plus diagnostics."""
    if validate:
        report = validate_hypothesis(mf, n_max=validate_up_to)
        if not report.passed:
            raise ValueError(f"rate functions rejected: {report}")
    times = sorted(set(float(t) for t in snapshot_times))
    if any(t < 0.0 or t > sim.horizon + 1e-12 for t in times):
        raise ValueError("snapshot times must lie within [0, horizon]")
    rng = np.random.default_rng(sim.seed)
    cfg = sample_initial_configuration(initial, sim.eps, rng)
    tables = _MassTables(mf, ks, sim.variant)
    acc = _StossAccumulator(tracking, sim.eps) if tracking is not None else None
    if acc is not None:
        acc.start(cfg)

    events: list[Event] = []
    snapshots: list[EmpiricalMeasure] = []
    wanted = set(times)
    for mark in sorted(wanted | {sim.horizon}):
        while cfg.time < mark - 1e-12:
            block = min(sim.dt, mark - cfg.time)
            events.extend(_advance(cfg, sim, ks, mf, block, rng, tables, acc))
        if mark in wanted:
            snapshots.append(empirical_measure(cfg, sim.eps))
    if acc is not None:
        acc.finish(cfg)

    return RunResult(
        seed=sim.seed,
        eps=sim.eps,
        n_initial=cfg.initial_count,
        snapshot_times=tuple(times),
        snapshots=snapshots,
        events=events,
        final=cfg,
        q_integral=None if acc is None else acc.q_integral,
        q_series=None if acc is None else acc.q_series,
        rhs_integrals=None if acc is None else acc.rhs_integral,
        rhs_series=None if acc is None else acc.rhs_series,
    )
