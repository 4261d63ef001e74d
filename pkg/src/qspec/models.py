"""Gaussian time-varying AR(1) testbed.

A triangular array ``X[t] = a(t/T) X[t-1] + eps[t]`` with smooth coefficient
curve ``a`` and Gaussian innovations, together with its family of stationary
approximations (a fixed-coefficient AR(1) for each rescaled time u).  The
array is defined for every integer t by clamping the curve outside [0, 1],
which keeps the process stable on the whole axis and makes it exactly
stationary in the clamped regions.  All second-order quantities (marginal
variances, cross covariances) are computed by exact recursions, so the model
doubles as an analytic oracle for the simulation routines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exceptions import UnstableModelError

# Geometric forgetting target for variance recursions and simulation burn-in.
_FORGET = 1e-14

_AUDIT_POINTS = 1001


def ceil_root(n: int, num: int = 1, den: int = 3) -> int:
    """Smallest positive integer m with m**den >= n**num (i.e. ceil(n**(num/den))).

    Integer arithmetic only; float powers misround at exact powers such as
    512**(1/3) or 32**0.4.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    target = n**num
    m = max(1, int(round(float(n) ** (num / den))))
    while m**den < target:
        m += 1
    while m > 1 and (m - 1) ** den >= target:
        m -= 1
    return m


@dataclass(frozen=True)
class CoefficientCurve:
    """AR coefficient as a function of rescaled time u in [0, 1].

    Evaluation clamps u to [0, 1], so the curve extends to the whole real
    line with the same Lipschitz constant.  ``sup_abs`` must be < 1
    (uniform stability); both declared constants are audited on a dense
    grid at construction.
    """

    fn: Callable[[float], float]
    lipschitz_const: float
    sup_abs: float
    kind: str = "custom"
    params: tuple = ()

    def __post_init__(self):
        if not 0.0 <= self.sup_abs < 1.0:
            raise UnstableModelError(
                f"sup |a(u)| = {self.sup_abs} must lie in [0, 1) for a stable model"
            )
        if self.lipschitz_const < 0.0:
            raise ValueError("lipschitz_const must be nonnegative")
        us = np.linspace(0.0, 1.0, _AUDIT_POINTS)
        vals = np.array([self.fn(float(u)) for u in us])
        if np.max(np.abs(vals)) > self.sup_abs + 1e-12:
            raise UnstableModelError(
                "curve exceeds its declared sup_abs on a dense grid"
            )
        steps = np.abs(np.diff(vals))
        if np.max(steps) > self.lipschitz_const / (_AUDIT_POINTS - 1) + 1e-12:
            raise ValueError("curve violates its declared Lipschitz constant")

    def __call__(self, u: float) -> float:
        if u < 0.0:
            u = 0.0
        elif u > 1.0:
            u = 1.0
        return float(self.fn(u))

    @classmethod
    def constant(cls, a: float) -> "CoefficientCurve":
        a = float(a)
        return cls(lambda u: a, 0.0, abs(a), kind="constant", params=(a,))

    @classmethod
    def linear(cls, a0: float, slope: float) -> "CoefficientCurve":
        """a(u) = a0 + slope * u."""
        a0 = float(a0)
        slope = float(slope)
        sup = max(abs(a0), abs(a0 + slope))
        return cls(
            lambda u: a0 + slope * u,
            abs(slope),
            sup,
            kind="linear",
            params=(a0, slope),
        )

    @classmethod
    def from_knots(cls, knots: Sequence[Sequence[float]]) -> "CoefficientCurve":
        """Piecewise-linear curve through (u, a) knots, clamped outside."""
        pts = [(float(u), float(a)) for u, a in knots]
        if not pts:
            raise ValueError("need at least one knot")
        us = np.array([p[0] for p in pts])
        vals = np.array([p[1] for p in pts])
        if np.any(np.diff(us) <= 0):
            raise ValueError("knot abscissae must be strictly increasing")
        if us[0] < 0.0 or us[-1] > 1.0:
            raise ValueError("knot abscissae must lie in [0, 1]")
        sup = float(np.max(np.abs(vals)))
        if len(pts) > 1:
            lip = float(np.max(np.abs(np.diff(vals) / np.diff(us))))
        else:
            lip = 0.0
        return cls(
            lambda u: float(np.interp(u, us, vals)),
            lip,
            sup,
            kind="knots",
            params=tuple(map(tuple, pts)),
        )


def default_curve() -> CoefficientCurve:
    """The default test curve a(u) = 0.3 + 0.4 u (smooth, clearly
    nonstationary, comfortably stable)."""
    return CoefficientCurve.linear(0.3, 0.4)


@dataclass(frozen=True)
class StationaryFamilyModel:
    """Stationary AR(1) approximation at rescaled time u: X(t) = a X(t-1) + eps."""

    u: float
    a: float
    innovation_sd: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.u < 1.0:
            raise ValueError("rescaled time u must lie in (0, 1)")
        if abs(self.a) >= 1.0:
            raise UnstableModelError(f"|a| = {abs(self.a)} >= 1")
        if self.innovation_sd <= 0.0:
            raise ValueError("innovation_sd must be positive")

    @property
    def marginal_sd(self) -> float:
        return self.innovation_sd / math.sqrt(1.0 - self.a * self.a)

    def corr(self, h: int) -> float:
        """Autocorrelation a**|h| (even in h)."""
        return float(self.a) ** abs(int(h))

    def quantile(self, tau: float) -> float:
        from scipy.special import ndtri

        return self.marginal_sd * float(ndtri(tau))


def family_corr(model: StationaryFamilyModel, h: int) -> float:
    """Autocorrelation of the stationary family member at lag h."""
    return model.corr(h)


@dataclass(frozen=True, eq=False)
class TriangularArrayModel:
    """Nonstationary Gaussian AR(1) array of length-T design.

    The process lives on all of Z; the coefficient at integer time t is
    ``curve(t / T)`` with the curve clamped outside [0, 1].  Marginal
    variances follow the exact recursion
    ``var[t] = innovation_sd**2 + a(t/T)**2 * var[t-1]``, initialized at the
    fixed point ``innovation_sd**2 / (1 - a**2)`` a forgetting window B
    before the first index of interest (B = ceil(log(1e-14)/log(sup_abs))).
    """

    curve: CoefficientCurve
    T: int
    innovation_sd: float = 1.0
    _var_cache: dict = field(default_factory=dict, repr=False, compare=False)
    _sd_range_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be a positive integer")
        if self.innovation_sd <= 0.0:
            raise ValueError("innovation_sd must be positive")

    # -- coefficient and variance structure ---------------------------------

    def coefficient(self, t: int) -> float:
        return self.curve(t / self.T)

    @property
    def burn_in(self) -> int:
        s = self.curve.sup_abs
        if s == 0.0:
            return 1
        return max(1, math.ceil(math.log(_FORGET) / math.log(s)))

    def variance(self, t: int) -> float:
        """Exact marginal variance of X[t], canonical B-step recursion."""
        t = int(t)
        v = self._var_cache.get(t)
        if v is not None:
            return v
        sig2 = self.innovation_sd**2
        start = t - self.burn_in
        a0 = self.coefficient(start)
        v = sig2 / (1.0 - a0 * a0)
        for i in range(start + 1, t + 1):
            a = self.coefficient(i)
            v = sig2 + a * a * v
        self._var_cache[t] = v
        return v

    def marginal_sd(self, t: int) -> float:
        return math.sqrt(self.variance(t))

    def marginal_sd_array(self, t_lo: int, t_hi: int) -> np.ndarray:
        """Marginal sds for t = t_lo..t_hi in one forward recursion pass."""
        key = (int(t_lo), int(t_hi))
        cached = self._sd_range_cache.get(key)
        if cached is not None:
            return cached
        sig2 = self.innovation_sd**2
        start = t_lo - self.burn_in
        a0 = self.coefficient(start)
        v = sig2 / (1.0 - a0 * a0)
        out = np.empty(t_hi - t_lo + 1)
        for t in range(start + 1, t_hi + 1):
            a = self.coefficient(t)
            v = sig2 + a * a * v
            if t >= t_lo:
                out[t - t_lo] = v
        out = np.sqrt(out)
        out.setflags(write=False)
        self._sd_range_cache[key] = out
        return out

    def cross_cov(self, r: int, s: int) -> float:
        """Cov(X[r], X[s]) by the exact product recursion (symmetric in r, s)."""
        r, s = int(r), int(s)
        if r < s:
            r, s = s, r
        prod = 1.0
        for t in range(s + 1, r + 1):
            prod *= self.coefficient(t)
        return prod * self.variance(s)

    def correlation(self, r: int, s: int) -> float:
        if r == s:
            return 1.0
        return self.cross_cov(r, s) / (self.marginal_sd(r) * self.marginal_sd(s))

    def marginal_quantile(self, t: int, tau: float) -> float:
        from scipy.special import ndtri

        return self.marginal_sd(t) * float(ndtri(tau))

    def family_at(self, u: float) -> StationaryFamilyModel:
        """Stationary approximating process at rescaled time u."""
        return StationaryFamilyModel(u=u, a=self.curve(u), innovation_sd=self.innovation_sd)


def array_cross_cov(model: TriangularArrayModel, r: int, s: int) -> float:
    """Cov(X[r], X[s]) of the triangular array (exact, not Monte Carlo)."""
    return model.cross_cov(r, s)


# -- simulation --------------------------------------------------------------


@dataclass(frozen=True)
class SamplePath:
    """One simulated realization X[1..T]; regeneration from seed is bit-identical."""

    values: np.ndarray
    seed: int
    model: TriangularArrayModel

    def __post_init__(self):
        self.values.setflags(write=False)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class PathEnsemble:
    """Replicate paths over a common index window t_start..t_stop.

    ``values[i, j]`` is path i at time t_start + j.  Paths are mutually
    independent; path i depends only on ``seeds[i]``, never on n_rep.
    """

    values: np.ndarray
    t_start: int
    model: TriangularArrayModel
    seeds: np.ndarray

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def n_rep(self) -> int:
        return self.values.shape[0]

    @property
    def t_stop(self) -> int:
        return self.t_start + self.values.shape[1] - 1

    def column(self, t: int) -> np.ndarray:
        if not self.t_start <= t <= self.t_stop:
            raise IndexError(f"time index {t} outside window [{self.t_start}, {self.t_stop}]")
        return self.values[:, t - self.t_start]

    def path(self, i: int) -> SamplePath:
        if self.t_start != 1 or self.t_stop != self.model.T:
            raise ValueError("only full-range ensembles decompose into SamplePaths")
        return SamplePath(values=self.values[i].copy(), seed=int(self.seeds[i]), model=self.model)


def child_seeds(seed: int, n: int) -> np.ndarray:
    """n per-path 64-bit seeds derived from one root seed (prefix-stable)."""
    return np.random.SeedSequence(int(seed)).generate_state(int(n), dtype=np.uint64)


def _simulate_block(model: TriangularArrayModel, seeds, t_start: int, t_stop: int,
                    chunk: int = 65536) -> np.ndarray:
    """Simulate len(seeds) independent paths over t_start..t_stop.

    Each path draws its initial state and then its full innovation vector
    from its own Generator, so the result for path i is a function of
    seeds[i] alone.  The recursion is run time-step-major across the chunk,
    which is arithmetic-identical to running each path alone.
    """
    seeds = np.asarray(seeds, dtype=np.uint64)
    n = len(seeds)
    width = t_stop - t_start + 1
    if width < 1:
        raise ValueError("empty simulation window")
    B = model.burn_in
    t_init = t_start - B - 1
    a_init = model.coefficient(t_init)
    sd_init = model.innovation_sd / math.sqrt(1.0 - a_init * a_init)
    n_steps = t_stop - t_init
    coeffs = np.array([model.coefficient(t_init + 1 + j) for j in range(n_steps)])
    out = np.empty((n, width))
    if n == 1:
        # Scalar recursion; double mul/add is exactly rounded in both CPython
        # and numpy, so this stays bit-identical to the vectorized branch.
        rng = np.random.default_rng(int(seeds[0]))
        x = sd_init * float(rng.standard_normal())
        eps = model.innovation_sd * rng.standard_normal(n_steps)
        eps_list = eps.tolist()
        coeff_list = coeffs.tolist()
        row = out[0]
        skip = t_start - (t_init + 1)
        for j in range(n_steps):
            x = coeff_list[j] * x + eps_list[j]
            if j >= skip:
                row[j - skip] = x
        return out
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        m = hi - lo
        x = np.empty(m)
        eps = np.empty((m, n_steps))
        for i in range(m):
            rng = np.random.default_rng(int(seeds[lo + i]))
            x[i] = sd_init * rng.standard_normal()
            eps[i] = model.innovation_sd * rng.standard_normal(n_steps)
        for j in range(n_steps):
            x = coeffs[j] * x + eps[:, j]
            t = t_init + 1 + j
            if t >= t_start:
                out[lo:hi, t - t_start] = x
    return out


def simulate_path(model: TriangularArrayModel, seed: int) -> SamplePath:
    """Simulate X[1..T]; exact marginal law (clamped coefficients make the
    pre-sample segment exactly stationary), deterministic in seed."""
    values = _simulate_block(model, [int(seed)], 1, model.T)[0]
    return SamplePath(values=values, seed=int(seed), model=model)


def simulate_ensemble(model: TriangularArrayModel, n_rep: int, seed: int,
                      t_start: int = 1, t_stop: int | None = None) -> PathEnsemble:
    """n_rep independent paths over the window [t_start, t_stop] (defaults to
    the full design range 1..T); per-path seeds derived from ``seed``."""
    if t_stop is None:
        t_stop = model.T
    seeds = child_seeds(seed, n_rep)
    values = _simulate_block(model, seeds, t_start, t_stop)
    return PathEnsemble(values=values, t_start=t_start, model=model, seeds=seeds)
