"""Quantile levels, bivariate Gaussian probabilities, and the indicator
(copula) covariance kernels.

The central numerical kernel is ``bvn_cdf``: the standard bivariate normal
CDF evaluated through the single-integral representation

    P(Z1 <= x, Z2 <= y) = Phi(x) Phi(y)
        + (2 pi)^-1  int_0^{asin rho} exp(-(x^2 + y^2 - 2 x y sin t)
                                          / (2 cos^2 t)) dt,

integrated with fixed-node Gauss-Legendre quadrature.  The integrand is
entire in t on the integration segment for |rho| < 1, so the quadrature
converges geometrically; 64 nodes hold the absolute error below 1e-10 for
|rho| <= 0.99, which covers every stable AR model in this package.

On top of it sit the two indicator covariance kernels: the stationary one
(fixed rescaled time u, lag h) and the triangular-array one (center t0,
signed lag s with floor semantics), plus a replicate Monte Carlo
cross-check and an absolute-summability scan.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .exceptions import DegenerateCorrelationError, ReplicationError
from .models import PathEnsemble, SamplePath, StationaryFamilyModel, TriangularArrayModel

_GL_NODES = 64
_gl_x, _gl_w = np.polynomial.legendre.leggauss(_GL_NODES)
_GL_T = 0.5 * (_gl_x + 1.0)  # nodes mapped to [0, 1]
_GL_W = 0.5 * _gl_w

_TWO_PI = 2.0 * math.pi

#: Quantile levels outside this closed range are rejected rather than
#: specially handled.
TAU_MIN, TAU_MAX = 0.01, 0.99

_MIN_REPLICATES = 1000


class QuantileLevel(float):
    """A quantile order tau, restricted to [0.01, 0.99]."""

    def __new__(cls, tau):
        t = float(tau)
        if not 0.0 < t < 1.0:
            raise ValueError(f"quantile level {t} must lie strictly inside (0, 1)")
        if not TAU_MIN <= t <= TAU_MAX:
            raise ValueError(
                f"extreme quantile level {t} outside [{TAU_MIN}, {TAU_MAX}] is not supported"
            )
        return super().__new__(cls, t)


def _check_tau_pair(tau1, tau2):
    return QuantileLevel(tau1), QuantileLevel(tau2)


def bvn_cdf(x, y, rho: float):
    """P(Z1 <= x, Z2 <= y) for a standard bivariate normal with correlation rho.

    Broadcasts over ``x`` and ``y``; ``rho`` is a scalar with |rho| < 1
    (the comonotone limits are the caller's job).  Absolute error is below
    1e-10 for |rho| <= 0.99.
    """
    rho = float(rho)
    if abs(rho) >= 1.0:
        raise DegenerateCorrelationError(
            f"|rho| = {abs(rho)} >= 1; handle the comonotone limit separately"
        )
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = ndtr(x) * ndtr(y)
    if rho != 0.0:
        s = math.asin(rho)
        theta = s * _GL_T
        sin_t = np.sin(theta)
        inv_2cos2 = 0.5 / np.cos(theta) ** 2
        xx = x[..., None]
        yy = y[..., None]
        expo = -(xx * xx + yy * yy - 2.0 * xx * yy * sin_t) * inv_2cos2
        out = out + (s / _TWO_PI) * (np.exp(expo) @ _GL_W)
    out = np.clip(out, 0.0, 1.0)
    if out.ndim == 0:
        return float(out)
    return out


def gaussian_copula_indicator_cov(rho: float, tau1, tau2) -> float:
    """Cov(1{U <= tau1}, 1{V <= tau2}) when (U, V) follow a Gaussian copula
    with correlation rho; exact at the comonotone/countermonotone limits."""
    t1, t2 = _check_tau_pair(tau1, tau2)
    if rho >= 1.0:
        return min(t1, t2) - t1 * t2
    if rho <= -1.0:
        return max(t1 + t2 - 1.0, 0.0) - t1 * t2
    return float(bvn_cdf(ndtri(t1), ndtri(t2), rho)) - t1 * t2


def indicator_cov_stationary(model: StationaryFamilyModel, h: int, tau1, tau2) -> float:
    """Lag-h covariance of quantile-threshold indicators for the stationary
    family member: Cov(1{X(t) <= q(tau1)}, 1{X(t-h) <= q(tau2)}).

    The marginal scale cancels (the kernel is copula-based), so the value
    depends only on the autocorrelation at lag h and the pair (tau1, tau2).
    """
    return gaussian_copula_indicator_cov(model.corr(h), tau1, tau2)


def array_lag_indices(t0: int, s: int) -> tuple[int, int]:
    """The floor-convention index pair (floor(t0 + s/2), floor(t0 - s/2))."""
    t0 = int(t0)
    s = int(s)
    return (2 * t0 + s) // 2, (2 * t0 - s) // 2


def indicator_cov_array(model: TriangularArrayModel, t0: int, s: int, tau1, tau2) -> float:
    """Indicator covariance of the triangular array at center t0 and signed
    lag s, with thresholds at the exact marginal quantiles.

    Index pair is (floor(t0 + s/2), floor(t0 - s/2)), literal floor
    semantics including the asymmetry at odd s.  tau1 belongs to the leading
    index, tau2 to the lagging one.
    """
    i1, i2 = array_lag_indices(t0, s)
    if i1 == i2:
        return gaussian_copula_indicator_cov(1.0, tau1, tau2)
    rho = model.correlation(i1, i2)
    return gaussian_copula_indicator_cov(rho, tau1, tau2)


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    se: float
    n_rep: int
    mode: str


def _ensemble_from(paths) -> PathEnsemble:
    if isinstance(paths, PathEnsemble):
        return paths
    paths = list(paths)
    if not paths:
        raise ReplicationError("no replicate paths supplied")
    if not all(isinstance(p, SamplePath) for p in paths):
        raise TypeError("paths must be SamplePath instances or a PathEnsemble")
    model = paths[0].model
    values = np.stack([p.values for p in paths])
    seeds = np.array([p.seed for p in paths], dtype=np.uint64)
    return PathEnsemble(values=values, t_start=1, model=model, seeds=seeds)


def indicator_cov_mc(paths, t0: int, s: int, tau1, tau2, mode: str = "oracle") -> McEstimate:
    """Brute-force replicate estimate of the array indicator covariance.

    oracle mode thresholds at the exact Gaussian marginal quantiles; rank
    mode thresholds at the cross-replicate empirical quantile (generalized
    inverse, so the indicator fraction is ceil(n tau)/n exactly).
    """
    t1, t2 = _check_tau_pair(tau1, tau2)
    if mode not in ("oracle", "rank"):
        raise ValueError(f"unknown mode {mode!r}")
    ens = _ensemble_from(paths)
    n = ens.n_rep
    if n < _MIN_REPLICATES:
        raise ReplicationError(
            f"{n} replicate paths < {_MIN_REPLICATES}; standard error would be meaningless"
        )
    i1, i2 = array_lag_indices(t0, s)
    v1 = ens.column(i1)
    v2 = ens.column(i2)
    if mode == "oracle":
        thr1 = ens.model.marginal_quantile(i1, t1)
        thr2 = ens.model.marginal_quantile(i2, t2)
    else:
        thr1 = _empirical_quantile(v1, t1)
        thr2 = _empirical_quantile(v2, t2)
    d1 = (v1 <= thr1).astype(float)
    d2 = (v2 <= thr2).astype(float)
    d1 -= d1.mean()
    d2 -= d2.mean()
    prod = d1 * d2
    est = prod.sum() / (n - 1)
    se = prod.std(ddof=1) / math.sqrt(n)
    return McEstimate(estimate=float(est), se=float(se), n_rep=n, mode=mode)


def _empirical_quantile(values: np.ndarray, tau: float) -> float:
    """Generalized inverse inf{x : F_n(x) >= tau} = order statistic ceil(n tau)."""
    n = len(values)
    k = math.ceil(round(tau * n, 9))
    return float(np.sort(values)[k - 1])


# -- covariance tables --------------------------------------------------------

_TABLE_CSV_HEADER = ["kind", "u_or_t0", "T", "lag", "tau1", "tau2", "gamma"]


@dataclass(frozen=True)
class CopulaCovTable:
    """Indicator covariances over lags -H..H and a list of tau pairs.

    ``kind`` is "stationary" (u_or_t0 = rescaled time u, T unused) or
    "array" (u_or_t0 = integer center t0, T = design length).
    """

    kind: str
    u_or_t0: float
    T: int | None
    lags: np.ndarray
    tau_pairs: tuple
    values: np.ndarray  # shape (n_lags, n_pairs)

    def __post_init__(self):
        if self.kind not in ("stationary", "array"):
            raise ValueError(f"unknown table kind {self.kind!r}")
        if self.values.shape != (len(self.lags), len(self.tau_pairs)):
            raise ValueError("values shape does not match lags x tau_pairs")
        self.lags.setflags(write=False)
        self.values.setflags(write=False)

    @property
    def H(self) -> int:
        return int(np.max(np.abs(self.lags)))

    def gamma(self, lag: int, pair_index: int) -> float:
        idx = int(np.flatnonzero(self.lags == lag)[0])
        return float(self.values[idx, pair_index])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(_TABLE_CSV_HEADER)
        t_field = "" if self.T is None else str(self.T)
        for i, lag in enumerate(self.lags):
            for j, (t1, t2) in enumerate(self.tau_pairs):
                w.writerow(
                    [
                        self.kind,
                        f"{self.u_or_t0:.17g}",
                        t_field,
                        int(lag),
                        f"{t1:.17g}",
                        f"{t2:.17g}",
                        f"{self.values[i, j]:.17g}",
                    ]
                )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CopulaCovTable":
        rows = list(csv.reader(io.StringIO(text)))
        if rows[0] != _TABLE_CSV_HEADER:
            raise ValueError("unexpected covariance-table CSV header")
        body = rows[1:]
        kind = body[0][0]
        u_or_t0 = float(body[0][1])
        T = int(body[0][2]) if body[0][2] else None
        lags = sorted({int(r[3]) for r in body})
        pairs = []
        for r in body:
            pair = (float(r[4]), float(r[5]))
            if pair not in pairs:
                pairs.append(pair)
        values = np.empty((len(lags), len(pairs)))
        lag_idx = {lag: i for i, lag in enumerate(lags)}
        pair_idx = {p: j for j, p in enumerate(pairs)}
        for r in body:
            values[lag_idx[int(r[3])], pair_idx[(float(r[4]), float(r[5]))]] = float(r[6])
        return cls(
            kind=kind,
            u_or_t0=u_or_t0,
            T=T,
            lags=np.array(lags),
            tau_pairs=tuple(pairs),
            values=values,
        )


def stationary_cov_table(model: StationaryFamilyModel, H: int, tau_pairs) -> CopulaCovTable:
    pairs = tuple(_check_tau_pair(t1, t2) for t1, t2 in tau_pairs)
    lags = np.arange(-H, H + 1)
    values = np.empty((len(lags), len(pairs)))
    for i, h in enumerate(lags):
        for j, (t1, t2) in enumerate(pairs):
            values[i, j] = indicator_cov_stationary(model, int(h), t1, t2)
    return CopulaCovTable(
        kind="stationary", u_or_t0=model.u, T=None, lags=lags, tau_pairs=pairs, values=values
    )


def array_cov_table(model: TriangularArrayModel, t0: int, H: int, tau_pairs) -> CopulaCovTable:
    pairs = tuple(_check_tau_pair(t1, t2) for t1, t2 in tau_pairs)
    lags = np.arange(-H, H + 1)
    values = np.empty((len(lags), len(pairs)))
    for i, s in enumerate(lags):
        for j, (t1, t2) in enumerate(pairs):
            values[i, j] = indicator_cov_array(model, t0, int(s), t1, t2)
    return CopulaCovTable(
        kind="array", u_or_t0=float(t0), T=model.T, lags=lags, tau_pairs=pairs, values=values
    )


# -- summability --------------------------------------------------------------


@dataclass(frozen=True)
class SummabilityBudget:
    """Grid-certified uniform summability bound.

    K is the maximum over the table's tau pairs of the partial absolute sum
    up to H_used; tail_bound is the conservative analytic tail beyond H_used
    (|gamma_h| <= |rho_h|) when a stability level was supplied, and
    per_lag_certified records whether every table entry respects that
    per-lag bound.
    """

    K: float
    H_used: int
    tail_bound: float | None = None
    per_lag_certified: bool | None = None


def _rho_envelope(sup_abs: float, lag: int, kind: str) -> float:
    """Upper bound for |corr| at the given lag under uniform stability."""
    r = sup_abs ** abs(lag)
    if kind == "array" and sup_abs > 0.0:
        # marginal sds range over [sd_min, sd_max] with ratio 1/sqrt(1-sup_abs^2)
        r /= math.sqrt(1.0 - sup_abs * sup_abs)
    return min(1.0, r)


def geometric_budget(sup_abs: float, kind: str = "stationary") -> float:
    """Analytic bound on sum_h |gamma_h| from |gamma_h| <= min(1/4, |rho_h|).

    Lags where the correlation envelope still exceeds 1/4 contribute 1/4
    each; once the envelope drops below 1/4 it is purely geometric and the
    remainder closes in one step.
    """
    if not 0.0 <= sup_abs < 1.0:
        raise ValueError("sup_abs must lie in [0, 1)")
    total = 0.25
    if sup_abs == 0.0:
        return total
    h = 1
    while True:
        env = _rho_envelope(sup_abs, h, kind)
        if env <= 0.25:
            total += 2.0 * env / (1.0 - sup_abs)
            return total
        total += 0.5
        h += 1


def geometric_tail(sup_abs: float, H: int, kind: str = "stationary") -> float:
    """Analytic bound on sum_{|h| > H} |gamma_h| (same envelope as the budget)."""
    if sup_abs == 0.0:
        return 0.0
    total = 0.0
    h = H + 1
    while True:
        env = _rho_envelope(sup_abs, h, kind)
        if env <= 0.25:
            total += 2.0 * env / (1.0 - sup_abs)
            return total
        total += 0.5
        h += 1


def summability_scan(table: CopulaCovTable, sup_abs: float | None = None) -> SummabilityBudget:
    """Max over tau pairs of the partial absolute sum, with the geometric
    per-lag certificate when the model's stability level is supplied."""
    K = float(np.max(np.sum(np.abs(table.values), axis=0)))
    H = table.H
    tail = None
    certified = None
    if sup_abs is not None:
        tail = geometric_tail(sup_abs, H, table.kind)
        bounds = np.array(
            [min(0.25, _rho_envelope(sup_abs, int(lag), table.kind)) for lag in table.lags]
        )
        certified = bool(np.all(np.abs(table.values) <= bounds[:, None] + 1e-12))
    return SummabilityBudget(K=K, H_used=H, tail_bound=tail, per_lag_certified=certified)
