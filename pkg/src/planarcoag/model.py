"""Core model data: particles, rate functions, kernels, and initial data."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.integrate import quad

TWO_PI = 2.0 * math.pi


def log_scale(eps: float) -> float:
    """Return |log eps| for eps in (0, 1)."""
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    return -math.log(eps)


def particle_count(Z: float, eps: float) -> int:
    """Initial particle number: Z * |log eps| rounded to the nearest integer."""
    return int(round(Z * log_scale(eps)))


# ---------------------------------------------------------------------------
# particles and configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Particle:
    """A point particle with a position in the plane and an integer mass."""

    position: tuple[float, float]
    mass: int

    def __post_init__(self) -> None:
        if self.mass < 1:
            raise ValueError(f"mass must be a positive integer, got {self.mass}")
        if not all(math.isfinite(c) for c in self.position):
            raise ValueError(f"position must be finite, got {self.position}")


class Configuration:
    """A finite indexed family of particles.

    Indices are stable within a configuration lineage: killing a particle never
    renumbers survivors, and a merged particle always receives a fresh index.
    Storage is flat numpy buffers with an alive mask; dead rows persist (their
    index is simply never reused) and appends grow the buffers amortised.
    """

    __slots__ = ("_pos", "_mass", "_alive", "_size", "time", "initial_count")

    def __init__(
        self,
        positions: np.ndarray,
        masses: np.ndarray,
        alive: np.ndarray | None = None,
        time: float = 0.0,
        initial_count: int | None = None,
    ) -> None:
        self._pos = np.ascontiguousarray(positions, dtype=np.float64).reshape(-1, 2)
        self._mass = np.ascontiguousarray(masses, dtype=np.int64)
        n = self._mass.shape[0]
        if self._pos.shape[0] != n:
            raise ValueError("positions and masses must have matching lengths")
        if alive is None:
            alive = np.ones(n, dtype=bool)
        self._alive = np.ascontiguousarray(alive, dtype=bool)
        self._size = n
        self.time = float(time)
        self.initial_count = int(n if initial_count is None else initial_count)
        if np.any(self._mass[self._alive] < 1):
            raise ValueError("all masses must be >= 1")
        if not np.all(np.isfinite(self._pos[self._alive])):
            raise ValueError("all live positions must be finite")

    @classmethod
    def from_particles(cls, particles: Sequence[Particle], time: float = 0.0) -> "Configuration":
        if particles:
            pos = np.array([p.position for p in particles], dtype=np.float64)
            mass = np.array([p.mass for p in particles], dtype=np.int64)
        else:
            pos = np.empty((0, 2), dtype=np.float64)
            mass = np.empty(0, dtype=np.int64)
        return cls(pos, mass, time=time)

    @property
    def positions(self) -> np.ndarray:
        """(n, 2) view of all rows ever allocated, dead ones included."""
        return self._pos[: self._size]

    @property
    def masses(self) -> np.ndarray:
        return self._mass[: self._size]

    @property
    def alive(self) -> np.ndarray:
        return self._alive[: self._size]

    def copy(self) -> "Configuration":
        cfg = Configuration.__new__(Configuration)
        cfg._pos = self._pos.copy()
        cfg._mass = self._mass.copy()
        cfg._alive = self._alive.copy()
        cfg._size = self._size
        cfg.time = self.time
        cfg.initial_count = self.initial_count
        return cfg

    @property
    def count(self) -> int:
        """Number of live particles."""
        return int(np.count_nonzero(self.alive))

    @property
    def total_mass(self) -> int:
        return int(self.masses[self.alive].sum())

    def live_indices(self) -> np.ndarray:
        return np.nonzero(self.alive)[0]

    def particle(self, index: int) -> Particle:
        if index >= self._size or not self._alive[index]:
            raise KeyError(f"particle {index} is not alive")
        x, y = self._pos[index]
        return Particle((float(x), float(y)), int(self._mass[index]))

    def __iter__(self) -> Iterator[tuple[int, Particle]]:
        for i in self.live_indices():
            yield int(i), self.particle(int(i))

    def __len__(self) -> int:
        return self.count

    # mutation is reserved for the simulation engine; both helpers keep the
    # "indices are never reused" invariant.
    def _kill(self, index: int) -> None:
        if index >= self._size or not self._alive[index]:
            raise KeyError(f"particle {index} is already dead")
        self._alive[index] = False

    def _append(self, position: np.ndarray, mass: int) -> int:
        if self._size == self._mass.shape[0]:
            grow = max(8, self._size // 4)
            self._pos = np.concatenate([self._pos, np.zeros((grow, 2))])
            self._mass = np.concatenate([self._mass, np.zeros(grow, dtype=np.int64)])
            self._alive = np.concatenate([self._alive, np.zeros(grow, dtype=bool)])
        k = self._size
        self._pos[k] = position
        self._mass[k] = mass
        self._alive[k] = True
        self._size = k + 1
        return k


# ---------------------------------------------------------------------------
# mass-indexed rate functions
# ---------------------------------------------------------------------------


def constant_rate(value: float) -> Callable[[int, int], float]:
    """Pair rate alpha(n, m) = value."""
    value = float(value)

    def rate(n: int, m: int) -> float:
        return value

    return rate


def product_rate(value: float) -> Callable[[int, int], float]:
    """Pair rate alpha(n, m) = value * n * m."""
    value = float(value)

    def rate(n: int, m: int) -> float:
        return value * n * m

    return rate


def tabulated_rate(table: np.ndarray) -> Callable[[int, int], float]:
    """Pair rate from a square table, clamped at the table edge for large masses."""
    arr = np.asarray(table, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("rate table must be square")
    top = arr.shape[0]

    def rate(n: int, m: int) -> float:
        return float(arr[min(n, top) - 1, min(m, top) - 1])

    return rate


def constant_diffusivity(value: float) -> Callable[[int], float]:
    """d(n) = value (one half of the diffusion rate)."""
    value = float(value)

    def d(n: int) -> float:
        return value

    return d


def power_diffusivity(value: float, exponent: float) -> Callable[[int], float]:
    """d(n) = value * n ** (-exponent)."""
    value = float(value)
    exponent = float(exponent)

    def d(n: int) -> float:
        return value * float(n) ** (-exponent)

    return d


def tabulated_diffusivity(table: np.ndarray) -> Callable[[int], float]:
    arr = np.asarray(table, dtype=np.float64)
    top = arr.shape[0]

    def d(n: int) -> float:
        return float(arr[min(n, top) - 1])

    return d


@dataclass(frozen=True)
class MassFunctions:
    """Microscopic propensity alpha, half diffusion rate d, dominating gamma."""

    alpha: Callable[[int, int], float]
    d: Callable[[int], float]
    gamma: Callable[[int, int], float]

    @classmethod
    def homogeneous(cls, alpha_value: float, d_value: float = 0.5) -> "MassFunctions":
        """Constant alpha and d, with gamma = alpha (the tightest dominator)."""
        return cls(
            alpha=constant_rate(alpha_value),
            d=constant_diffusivity(d_value),
            gamma=constant_rate(alpha_value),
        )

    def d_table(self, n_max: int) -> np.ndarray:
        return np.array([self.d(n) for n in range(1, n_max + 1)], dtype=np.float64)

    def alpha_table(self, n_max: int) -> np.ndarray:
        out = np.empty((n_max, n_max), dtype=np.float64)
        for n in range(1, n_max + 1):
            for m in range(1, n_max + 1):
                out[n - 1, m - 1] = self.alpha(n, m)
        return out

    def gamma_table(self, n_max: int, m_max: int) -> np.ndarray:
        out = np.empty((n_max, m_max), dtype=np.float64)
        for n in range(1, n_max + 1):
            for m in range(1, m_max + 1):
                out[n - 1, m - 1] = self.gamma(n, m)
        return out


def tau(n: int, m: int, mf: MassFunctions) -> float:
    """Ratio alpha(n, m) / (d(n) + d(m)) driving the rate conversion."""
    return mf.alpha(n, m) / (mf.d(n) + mf.d(m))


def beta(n: int, m: int, mf: MassFunctions) -> float:
    """Macroscopic coagulation rate for the pair of masses (n, m).

    beta = 2*pi*(d(n)+d(m))*alpha / (2*pi*(d(n)+d(m)) + alpha); saturates at
    2*pi*(d(n)+d(m)) for large alpha.
    """
    dsum = mf.d(n) + mf.d(m)
    a = mf.alpha(n, m)
    return TWO_PI * dsum * a / (TWO_PI * dsum + a)


def beta_table(mf: MassFunctions, n_max: int) -> np.ndarray:
    out = np.empty((n_max, n_max), dtype=np.float64)
    for n in range(1, n_max + 1):
        for m in range(1, n_max + 1):
            out[n - 1, m - 1] = beta(n, m, mf)
    return out


# ---------------------------------------------------------------------------
# interaction kernel and mollifier
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelSpec:
    """Interaction profile V: nonnegative, compactly supported, unit integral.

    ``V`` maps an (k, 2) array of points to (k,) values and must vanish for
    |x| >= R0.  ``radius_fn`` is only consulted by the mass-dependent-range
    simulation variant.
    """

    V: Callable[[np.ndarray], np.ndarray]
    R0: float
    v_max: float
    total_integral: float = 1.0
    radius_fn: Callable[[int], float] | None = None

    def __post_init__(self) -> None:
        if self.R0 <= 0.0:
            raise ValueError("R0 must be positive")
        if abs(self.total_integral - 1.0) > 1e-10:
            raise ValueError(
                f"kernel integral must equal 1 within 1e-10, got {self.total_integral}"
            )
        probe = _probe_points(self.R0)
        vals = self.V(probe)
        if np.any(vals < 0.0):
            raise ValueError("kernel must be nonnegative")
        outside = probe[np.hypot(probe[:, 0], probe[:, 1]) >= self.R0]
        if outside.size and np.any(self.V(outside) != 0.0):
            raise ValueError("kernel must vanish outside |x| < R0")


def _probe_points(radius: float, n: int = 41) -> np.ndarray:
    g = np.linspace(-1.5 * radius, 1.5 * radius, n)
    xx, yy = np.meshgrid(g, g)
    return np.column_stack([xx.ravel(), yy.ravel()])


def bump_kernel(R0: float = 1.0, radius_fn: Callable[[int], float] | None = None) -> KernelSpec:
    """Default kernel (2 / (pi R0^2)) * (1 - |x/R0|^2)_+ with exact unit mass."""
    peak = 2.0 / (math.pi * R0 * R0)

    def V(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1, 2)
        r2 = (x[:, 0] ** 2 + x[:, 1] ** 2) / (R0 * R0)
        return peak * np.clip(1.0 - r2, 0.0, None)

    return KernelSpec(V=V, R0=R0, v_max=peak, total_integral=1.0, radius_fn=radius_fn)


def kernel_integral(kernel: KernelSpec, tol: float = 1e-11) -> float:
    """Numerically integrate V over its support (radial Gauss quadrature oracle)."""

    def ring(r: float) -> float:
        theta = np.linspace(0.0, TWO_PI, 512, endpoint=False)
        pts = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        return float(kernel.V(pts).mean()) * TWO_PI * r

    val, _ = quad(ring, 0.0, kernel.R0, epsabs=tol, epsrel=tol, limit=200)
    return val


@dataclass(frozen=True)
class MollifierSpec:
    """Smoothing profile eta at scale delta used to turn point sets into densities."""

    eta: Callable[[np.ndarray], np.ndarray]
    delta: float
    support_radius: float
    sq_integral: float
    total_integral: float = 1.0

    def __post_init__(self) -> None:
        if self.delta <= 0.0:
            raise ValueError("delta must be positive")
        if abs(self.total_integral - 1.0) > 1e-10:
            raise ValueError(
                f"mollifier integral must equal 1 within 1e-10, got {self.total_integral}"
            )
        probe = _probe_points(self.support_radius)
        if np.any(self.eta(probe) < 0.0):
            raise ValueError("mollifier must be nonnegative")


def default_mollifier(delta: float) -> MollifierSpec:
    """(3/pi) * (1 - |u|^2)_+^2 scaled to delta; integral 1, self-integral 9/(5 pi)."""
    peak = 3.0 / math.pi

    def eta(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64).reshape(-1, 2)
        r2 = u[:, 0] ** 2 + u[:, 1] ** 2
        return peak * np.clip(1.0 - r2, 0.0, None) ** 2

    return MollifierSpec(
        eta=eta,
        delta=delta,
        support_radius=1.0,
        sq_integral=9.0 / (5.0 * math.pi),
        total_integral=1.0,
    )


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------


class UniformDisc:
    """Unit-mass uniform density on a disc."""

    def __init__(self, center: tuple[float, float] = (0.0, 0.0), radius: float = 1.0) -> None:
        self.center = (float(center[0]), float(center[1]))
        self.radius = float(radius)
        self.support_radius = self.radius
        self.sup_value = 1.0 / (math.pi * self.radius**2)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1, 2)
        r2 = (x[:, 0] - self.center[0]) ** 2 + (x[:, 1] - self.center[1]) ** 2
        return np.where(r2 < self.radius**2, self.sup_value, 0.0)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        r = self.radius * np.sqrt(rng.random(size))
        theta = TWO_PI * rng.random(size)
        return np.column_stack(
            [self.center[0] + r * np.cos(theta), self.center[1] + r * np.sin(theta)]
        )


class SmoothBump:
    """Unit-mass infinitely differentiable bump supported on a disc."""

    def __init__(self, center: tuple[float, float] = (0.0, 0.0), radius: float = 1.0) -> None:
        self.center = (float(center[0]), float(center[1]))
        self.radius = float(radius)
        self.support_radius = self.radius
        mass, _ = quad(lambda r: math.exp(-1.0 / (1.0 - r * r)) * r, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13)
        self._norm = 1.0 / (TWO_PI * mass * self.radius**2)
        self.sup_value = self._norm * math.exp(-1.0)

    def _profile(self, r2: np.ndarray) -> np.ndarray:
        inside = r2 < 1.0
        out = np.zeros_like(r2)
        out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
        return out

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1, 2)
        r2 = ((x[:, 0] - self.center[0]) ** 2 + (x[:, 1] - self.center[1]) ** 2) / self.radius**2
        return self._norm * self._profile(r2)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # rejection from the uniform disc; acceptance rate is ~0.47
        out = np.empty((size, 2), dtype=np.float64)
        filled = 0
        while filled < size:
            k = max(64, 2 * (size - filled))
            r2 = rng.random(k)
            theta = TWO_PI * rng.random(k)
            accept = rng.random(k) * math.exp(-1.0) < self._profile(r2)
            r = self.radius * np.sqrt(r2[accept])
            th = theta[accept]
            take = min(r.shape[0], size - filled)
            out[filled : filled + take, 0] = self.center[0] + r[:take] * np.cos(th[:take])
            out[filled : filled + take, 1] = self.center[1] + r[:take] * np.sin(th[:take])
            filled += take
        return out


class GaussianBlob:
    """Unit-mass isotropic Gaussian; support is the whole plane."""

    def __init__(self, center: tuple[float, float] = (0.0, 0.0), sigma: float = 1.0) -> None:
        self.center = (float(center[0]), float(center[1]))
        self.sigma = float(sigma)
        self.support_radius = math.inf
        self.sup_value = 1.0 / (TWO_PI * self.sigma**2)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1, 2)
        r2 = (x[:, 0] - self.center[0]) ** 2 + (x[:, 1] - self.center[1]) ** 2
        return self.sup_value * np.exp(-0.5 * r2 / self.sigma**2)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.asarray(self.center) + self.sigma * rng.standard_normal((size, 2))


@dataclass(frozen=True)
class Species:
    """One mass component of the initial data: h_n = weight * density."""

    mass: int
    weight: float
    density: object

    def __post_init__(self) -> None:
        if self.mass < 1:
            raise ValueError("species mass must be >= 1")
        if not 0.0 <= self.weight < math.inf:
            raise ValueError("species weight must be finite and nonnegative")


@dataclass(frozen=True)
class InitialData:
    """Family of per-mass initial densities with total weight Z."""

    species: tuple[Species, ...]

    def __post_init__(self) -> None:
        if not self.species:
            raise ValueError("initial data needs at least one species")
        if self.Z <= 0.0:
            raise ValueError("total initial weight Z must be positive")

    @property
    def Z(self) -> float:
        return float(sum(s.weight for s in self.species))

    @property
    def masses(self) -> tuple[int, ...]:
        return tuple(s.mass for s in self.species)

    def mass_weight(self, n: int) -> float:
        return float(sum(s.weight for s in self.species if s.mass == n))

    def density(self, n: int) -> Callable[[np.ndarray], np.ndarray]:
        """The density h_n as a callable on (k, 2) point arrays."""
        parts = [s for s in self.species if s.mass == n]

        def h(x: np.ndarray) -> np.ndarray:
            x = np.asarray(x, dtype=np.float64).reshape(-1, 2)
            out = np.zeros(x.shape[0], dtype=np.float64)
            for s in parts:
                out += s.weight * s.density(x)
            return out

        return h


def monodisperse(weight: float, density: object | None = None) -> InitialData:
    """Mass-1 particles only, by default uniformly spread on the unit disc."""
    return InitialData(species=(Species(1, weight, density or UniformDisc()),))


def sample_initial_configuration(
    initial: InitialData, eps: float, rng: np.random.Generator | int
) -> Configuration:
    """Draw the initial configuration of N = round(Z |log eps|) particles.

    Masses follow the weight fractions of the species and positions follow the
    per-species profiles, independently across particles.  Deterministic for a
    fixed seed.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    n_total = particle_count(initial.Z, eps)
    if n_total == 0:
        raise ValueError(
            f"Z |log eps| rounds to zero particles (Z={initial.Z}, eps={eps})"
        )
    probs = np.array([s.weight for s in initial.species], dtype=np.float64)
    probs /= probs.sum()
    which = rng.choice(len(initial.species), size=n_total, p=probs)
    positions = np.empty((n_total, 2), dtype=np.float64)
    masses = np.empty(n_total, dtype=np.int64)
    for k, s in enumerate(initial.species):
        rows = np.nonzero(which == k)[0]
        masses[rows] = s.mass
        if rows.size:
            positions[rows] = s.density.sample(rng, rows.size)
    return Configuration(positions, masses, time=0.0, initial_count=n_total)


# ---------------------------------------------------------------------------
# hypothesis and initial-data validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HypothesisReport:
    """Result of the exhaustive dominating-function check."""

    passed: bool
    violation: tuple[int, int, int] | None = None
    lhs: float | None = None
    rhs: float | None = None
    alpha_violation: tuple[int, int] | None = None

    def __str__(self) -> str:
        if self.passed:
            return "hypothesis check: pass"
        if self.alpha_violation is not None:
            n, m = self.alpha_violation
            return f"hypothesis check: alpha > gamma at (n={n}, m={m})"
        n1, n2, n3 = self.violation  # type: ignore[misc]
        return (
            f"hypothesis check: fail at (n1={n1}, n2={n2}, n3={n3}): "
            f"{self.lhs:.6g} > {self.rhs:.6g}"
        )


def validate_hypothesis(mf: MassFunctions, n_max: int) -> HypothesisReport:
    """Exhaustively test the dominating inequality for all triples up to n_max.

    Checks n2 * gamma(n1, n2+n3) * max(1, (d(n2+n3)/d(n2))^3)
    <= (n2+n3) * gamma(n1, n2), and alpha <= gamma on the same range.
    Returns the lexicographically first violating triple, if any.
    """
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    d_tab = mf.d_table(2 * n_max)
    g_tab = mf.gamma_table(n_max, 2 * n_max)
    a_tab = mf.alpha_table(n_max)

    bad = a_tab > g_tab[:, :n_max] * (1.0 + 1e-12)
    if np.any(bad):
        n, m = np.argwhere(bad)[0]
        return HypothesisReport(passed=False, alpha_violation=(int(n) + 1, int(m) + 1))

    n1 = np.arange(1, n_max + 1)[:, None, None]
    n2 = np.arange(1, n_max + 1)[None, :, None]
    n3 = np.arange(1, n_max + 1)[None, None, :]
    nsum = n2 + n3
    ratio = d_tab[nsum - 1] / d_tab[n2 - 1]
    lhs = n2 * g_tab[n1 - 1, nsum - 1] * np.maximum(1.0, ratio**3)
    rhs = nsum * g_tab[n1 - 1, n2 - 1]
    viol = lhs > rhs * (1.0 + 1e-12)
    if np.any(viol):
        i, j, k = np.argwhere(viol)[0]
        return HypothesisReport(
            passed=False,
            violation=(int(i) + 1, int(j) + 1, int(k) + 1),
            lhs=float(lhs[i, j, k]),
            rhs=float(rhs[i, j, k]),
        )
    return HypothesisReport(passed=True)


@dataclass(frozen=True)
class InitialDataReport:
    """Outcome of the sufficient-condition screen on (h_n, d, gamma).

    ``passed`` flags hard failures of the rate-function conditions; a merely
    unbounded support leaves ``passed`` true but clears ``sufficient``.
    """

    passed: bool
    sufficient: bool
    failures: tuple[str, ...] = ()
    flags: tuple[str, ...] = ()

    def __str__(self) -> str:
        lines = [f"initial-data check: {'pass' if self.passed else 'FAIL'}"]
        lines += [f"  failure: {m}" for m in self.failures]
        lines += [f"  flag: {m}" for m in self.flags]
        return "\n".join(lines)


def validate_initial_data(
    initial: InitialData,
    mf: MassFunctions,
    m_max: int = 64,
    probe_factor: int = 8,
) -> InitialDataReport:
    """Screen the sufficient conditions: bounded compactly supported total mass
    density, bounded d, and gamma(n, m) growing at most linearly in n.

    Boundedness of d and linearity of gamma are probed on masses up to
    probe_factor * m_max; this is a finite-range certificate, not a proof.
    """
    failures: list[str] = []
    flags: list[str] = []

    for s in initial.species:
        if not math.isfinite(s.density.sup_value) or not math.isfinite(s.weight):
            failures.append(
                f"species mass={s.mass}: density is not bounded, total mass density k unbounded"
            )
    if any(not math.isfinite(s.density.support_radius) for s in initial.species):
        flags.append(
            "sufficient conditions not met: some h_n has unbounded support; "
            "the integral conditions were not certified"
        )

    top = probe_factor * m_max
    d_probe = mf.d_table(top)
    d_base_max = d_probe[:m_max].max()
    if d_probe[m_max:].max(initial=0.0) > d_base_max * (1.0 + 1e-9):
        failures.append(
            f"d is not bounded: d grows beyond n={m_max} on the probed range (up to n={top})"
        )

    g_probe = mf.gamma_table(top, m_max)  # (top, m_max): rows n, cols m
    n_vals = np.arange(1, top + 1, dtype=np.float64)[:, None]
    ratio = g_probe / n_vals
    base = ratio[:m_max].max(axis=0)
    tail = ratio[m_max:].max(axis=0, initial=0.0)
    if np.any(tail > base * (1.0 + 1e-9)):
        m_bad = int(np.argwhere(tail > base * (1.0 + 1e-9))[0][0]) + 1
        failures.append(
            f"gamma(n, m={m_bad}) grows super-linearly in n on the probed range"
        )

    passed = not failures
    return InitialDataReport(
        passed=passed,
        sufficient=passed and not flags,
        failures=tuple(failures),
        flags=tuple(flags),
    )
