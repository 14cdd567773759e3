"""Deterministic solver for the mass-indexed reaction-diffusion limit system."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import BinaryIO, Callable, Sequence

import numpy as np

from .model import InitialData, MassFunctions, log_scale
from .simulation import EmpiricalMeasure, integrate_test_function

__all__ = [
    "PdeConfig",
    "MassDensityField",
    "planar_field",
    "homogeneous_field",
    "gain_term",
    "loss_term",
    "step_reaction",
    "step_diffusion",
    "solve",
    "weak_error",
    "save_field",
    "load_field",
]

_MAGIC = b"PCF1"


@dataclass(frozen=True)
class PdeConfig:
    """Grid, step and truncation parameters for the density solver."""

    L: float
    hx: float
    dt: float
    m_max: int
    boundary: str = "neumann"
    mode: str = "planar"

    def __post_init__(self) -> None:
        if self.mode not in ("planar", "homogeneous"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.boundary not in ("neumann", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.m_max < 1:
            raise ValueError("m_max must be >= 1")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.mode == "planar":
            if self.L <= 0.0 or self.hx <= 0.0:
                raise ValueError("planar mode needs positive L and hx")
            if abs(round(2 * self.L / self.hx) - 2 * self.L / self.hx) > 1e-9:
                raise ValueError("2 L must be an integer multiple of hx")

    @property
    def n_cells(self) -> int:
        return int(round(2 * self.L / self.hx))

    def cell_centers(self) -> np.ndarray:
        return -self.L + self.hx * (np.arange(self.n_cells) + 0.5)

    def cfl_limit(self, mf: MassFunctions) -> float:
        d_max = max(mf.d(n) for n in range(1, self.m_max + 1))
        return math.inf if d_max == 0.0 else self.hx**2 / (4.0 * d_max)


@dataclass
class MassDensityField:
    """Per-mass number densities f_n, n = 1..m_max, plus the overflow sink.

    In planar mode ``values`` has shape (m_max, ny, nx) over the cell centres
    of [-L, L]^2; in homogeneous mode it is a flat (m_max,) vector of constant
    densities.  ``overflow_mass`` records mass that coagulated past m_max
    (area-integrated in planar mode, per unit area otherwise).
    """

    values: np.ndarray
    L: float
    hx: float
    time: float = 0.0
    overflow_mass: float = 0.0

    @property
    def m_max(self) -> int:
        return self.values.shape[0]

    @property
    def planar(self) -> bool:
        return self.values.ndim == 3

    def copy(self) -> "MassDensityField":
        return MassDensityField(self.values.copy(), self.L, self.hx, self.time, self.overflow_mass)

    def cell_centers(self) -> np.ndarray:
        n = self.values.shape[-1]
        return -self.L + self.hx * (np.arange(n) + 0.5)

    def quadrature(self, g: np.ndarray) -> float:
        """Integrate a per-cell array over the domain."""
        if self.planar:
            return float(g.sum()) * self.hx * self.hx
        return float(np.asarray(g).sum())

    def number_density(self) -> float:
        """Integral of sum_n f_n (a plain density in homogeneous mode)."""
        return self.quadrature(self.values.sum(axis=0))

    def mass_density(self) -> float:
        """Integral of sum_n n f_n, excluding the overflow sink."""
        n = np.arange(1, self.m_max + 1, dtype=np.float64)
        weighted = np.tensordot(n, self.values, axes=(0, 0))
        return self.quadrature(weighted)


def planar_field(initial: InitialData, cfg: PdeConfig) -> MassDensityField:
    """Evaluate the initial densities h_n on the grid."""
    if cfg.mode != "planar":
        raise ValueError("planar_field needs a planar config")
    xs = cfg.cell_centers()
    xx, yy = np.meshgrid(xs, xs)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    values = np.zeros((cfg.m_max, xs.size, xs.size), dtype=np.float64)
    for s in initial.species:
        if s.mass > cfg.m_max:
            raise ValueError(f"species mass {s.mass} exceeds m_max={cfg.m_max}")
        values[s.mass - 1] += (s.weight * s.density(pts)).reshape(xs.size, xs.size)
    return MassDensityField(values, L=cfg.L, hx=cfg.hx)


def homogeneous_field(concentrations: Sequence[float], m_max: int) -> MassDensityField:
    """Spatially constant densities c_n; entries beyond the sequence are zero."""
    values = np.zeros(m_max, dtype=np.float64)
    for n, c in enumerate(concentrations, start=1):
        if n > m_max:
            break
        values[n - 1] = c
    return MassDensityField(values, L=0.0, hx=0.0)


# ---------------------------------------------------------------------------
# reaction
# ---------------------------------------------------------------------------


def gain_term(field: MassDensityField, n: int, beta_tab: np.ndarray) -> np.ndarray:
    """sum_{m=1}^{n-1} beta(m, n-m) f_m f_{n-m}, pointwise (empty for n = 1)."""
    f = field.values
    out = np.zeros_like(f[0])
    for m in range(1, n):
        out += beta_tab[m - 1, n - m - 1] * f[m - 1] * f[n - m - 1]
    return out


def loss_term(field: MassDensityField, n: int, beta_tab: np.ndarray) -> np.ndarray:
    """2 f_n sum_{m<=m_max} beta(m, n) f_m, pointwise."""
    f = field.values
    m_max = field.m_max
    s = np.tensordot(beta_tab[:m_max, n - 1], f, axes=(0, 0))
    return 2.0 * f[n - 1] * s


def _reaction_rates(
    f: np.ndarray, beta_tab: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All gain and loss fields at once, plus the mass flux past m_max."""
    m_max = f.shape[0]
    if f.ndim == 1:
        # one outer product and an antidiagonal reduction
        pair = beta_tab[:m_max, :m_max] * np.outer(f, f)
        s = np.add.outer(np.arange(1, m_max + 1), np.arange(1, m_max + 1))
        sums = np.bincount(s.ravel(), weights=pair.ravel(), minlength=2 * m_max + 1)
        gain = sums[1 : m_max + 1]
        overflow = float(np.dot(np.arange(m_max + 1, 2 * m_max + 1), sums[m_max + 1 :]))
        loss = 2.0 * f * (beta_tab[:m_max, :m_max] @ f)
        return gain, loss, np.float64(overflow)
    gain = np.zeros_like(f)
    overflow = np.zeros_like(f[0])
    for a in range(1, m_max + 1):
        fa = f[a - 1]
        top = m_max - a
        if top >= 1:
            # products a + b <= m_max land in the gain of n = a + b
            bs = beta_tab[a - 1, 0:top]
            gain[a:m_max] += bs[:, None, None] * fa * f[0:top]
        # pairs with a + b > m_max leave the resolved range; count their mass
        bs = beta_tab[a - 1, top:m_max]
        masses = np.arange(a + top + 1, a + m_max + 1, dtype=np.float64)
        overflow += np.tensordot(bs * masses, fa * f[top:m_max], axes=(0, 0))
    loss = 2.0 * f * np.tensordot(beta_tab[:m_max, :m_max], f, axes=(0, 0))
    return gain, loss, overflow


def step_reaction(
    field: MassDensityField, dt: float, beta_tab: np.ndarray
) -> MassDensityField:
    """Euler reaction update with automatic substepping for positivity.

    Substeps are chosen so dt_sub * 2 sum_m beta(m, n) f_m stays below 0.9
    everywhere, which keeps every f_n nonnegative.
    """
    out = field.copy()
    f = out.values
    m_max = field.m_max
    remaining = float(dt)
    while remaining > 0.0:
        decay = 2.0 * np.tensordot(beta_tab[:m_max, :m_max], f, axes=(0, 0))
        rate = float(decay.max(initial=0.0))
        dt_sub = remaining if rate * remaining <= 0.9 else 0.9 / rate
        gain, loss, overflow = _reaction_rates(f, beta_tab)
        f += dt_sub * (gain - loss)
        np.clip(f, 0.0, None, out=f)
        out.overflow_mass += dt_sub * out.quadrature(overflow)
        remaining -= dt_sub
    out.time = field.time + dt
    return out


# ---------------------------------------------------------------------------
# diffusion
# ---------------------------------------------------------------------------


def _laplacian(u: np.ndarray, hx: float, boundary: str) -> np.ndarray:
    if boundary == "periodic":
        lap = (
            np.roll(u, 1, axis=-1)
            + np.roll(u, -1, axis=-1)
            + np.roll(u, 1, axis=-2)
            + np.roll(u, -1, axis=-2)
            - 4.0 * u
        )
    else:
        p = np.pad(u, ((1, 1), (1, 1)), mode="edge")
        lap = p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4.0 * u
    return lap / (hx * hx)


def step_diffusion(field: MassDensityField, dt: float, mf: MassFunctions,
                   boundary: str = "neumann") -> MassDensityField:
    """Explicit 5-point heat step with per-mass coefficient d(n)."""
    out = field.copy()
    if not field.planar or dt == 0.0:
        out.time = field.time + dt
        return out
    d_tab = mf.d_table(field.m_max)
    d_max = float(d_tab.max())
    if d_max > 0.0 and dt > field.hx**2 / (4.0 * d_max) * (1.0 + 1e-12):
        raise ValueError(
            f"diffusion step dt={dt} violates the stability limit "
            f"{field.hx ** 2 / (4 * d_max):.3e}"
        )
    for n in range(field.m_max):
        if d_tab[n] == 0.0:
            continue
        out.values[n] += dt * d_tab[n] * _laplacian(field.values[n], field.hx, boundary)
    out.time = field.time + dt
    return out


# ---------------------------------------------------------------------------
# full system
# ---------------------------------------------------------------------------


def solve(
    f0: MassDensityField,
    cfg: PdeConfig,
    mf: MassFunctions,
    T: float,
    snapshot_times: Sequence[float],
    beta_tab: np.ndarray | None = None,
) -> list[MassDensityField]:
    """Strang-split (diffusion / reaction / diffusion) trajectory.

    Returns copies of the field at each requested time, in ascending order.
    """
    from .model import beta_table

    if beta_tab is None:
        beta_tab = beta_table(mf, cfg.m_max)
    times = sorted(set(float(t) for t in snapshot_times))
    if any(t < 0.0 or t > T + 1e-12 for t in times):
        raise ValueError("snapshot times must lie within [0, T]")
    if cfg.mode == "planar" and cfg.dt > cfg.cfl_limit(mf) * (1.0 + 1e-12):
        raise ValueError("cfg.dt violates the diffusion stability limit")

    field = f0.copy()
    out: list[MassDensityField] = []
    wanted = set(times)
    for mark in sorted(wanted | {float(T)}):
        while field.time < mark - 1e-12:
            dt = min(cfg.dt, mark - field.time)
            t0 = field.time
            if cfg.mode == "planar":
                field = step_diffusion(field, 0.5 * dt, mf, cfg.boundary)
                field = step_reaction(field, dt, beta_tab)
                field = step_diffusion(field, 0.5 * dt, mf, cfg.boundary)
            else:
                field = step_reaction(field, dt, beta_tab)
            field.time = t0 + dt
        if mark in wanted:
            out.append(field.copy())
    return out


def weak_error(
    em: EmpiricalMeasure,
    field: MassDensityField,
    J: Callable[[np.ndarray], np.ndarray],
    n: int,
) -> float:
    """|integral of J against g_n minus the grid quadrature of J f_n|."""
    if not field.planar:
        raise ValueError("weak_error needs a planar field")
    xs = field.cell_centers()
    xx, yy = np.meshgrid(xs, xs)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    jg = J(pts).reshape(xx.shape)
    grid_part = float(np.sum(jg * field.values[n - 1])) * field.hx**2
    return abs(integrate_test_function(em, J, n) - grid_part)


# ---------------------------------------------------------------------------
# binary serialisation (exact round trip)
# ---------------------------------------------------------------------------


def save_field(field: MassDensityField, fh: BinaryIO) -> None:
    shape = field.values.shape
    ny, nx = (shape[1], shape[2]) if field.planar else (0, 0)
    fh.write(_MAGIC)
    fh.write(
        struct.pack(
            "<IIIdddd", field.m_max, ny, nx, field.L, field.hx, field.time, field.overflow_mass
        )
    )
    fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def load_field(fh: BinaryIO) -> MassDensityField:
    if fh.read(4) != _MAGIC:
        raise ValueError("not a density-field file")
    m_max, ny, nx, L, hx, time, overflow = struct.unpack("<IIIdddd", fh.read(44))
    count = m_max * ny * nx if ny else m_max
    data = np.frombuffer(fh.read(8 * count), dtype="<f8").copy()
    values = data.reshape((m_max, ny, nx)) if ny else data
    return MassDensityField(values, L=L, hx=hx, time=time, overflow_mass=overflow)
