"""Numerical verification harness.

Certifies, on declared finite grids, the structural properties that make the
time-varying copula spectrum of the array well defined and unique:

* ``certify_local_stationarity`` -- the Lipschitz-type constant L_hat
  bounding the sup-norm distance between the array's bivariate CDFs and
  those of the stationary approximating family, relative to the time drift
  plus 1/T.
* ``check_lag_bound`` -- the lag-level deviation bound
  |gamma^u_h - gamma_{t0}(h)| <= slack * 3 L_hat (|h| + 2) / T.
* ``sup_convergence_sweep`` -- uniform-distance convergence of the
  Wigner-Ville quantile spectrum to the stationary copula spectrum as T
  grows (truncation H(T) = ceil(T^(1/3))).
* ``summability_check`` -- partial absolute sums of both kernels against the
  analytic geometric budget, with a geometric-decay certificate on the
  increments.
* ``l2_convergence_sweep`` -- the classical (L2) analog for the raw
  covariance spectra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .copula import (
    bvn_cdf,
    geometric_budget,
    indicator_cov_array,
    indicator_cov_stationary,
    _rho_envelope,
)
from .models import StationaryFamilyModel, TriangularArrayModel, ceil_root
from .spectra import (
    FrequencyGrid,
    SpectrumGrid,
    classical_tv_spectrum,
    classical_wv_spectrum,
    copula_tv_spectrum,
    l2_distance_per_pair,
    sup_distance_per_pair,
    wv_quantile_spectrum,
)

_TWO_PI = 2.0 * math.pi

DEFAULT_U_GRID = tuple(round(0.1 * k, 10) for k in range(1, 10))
DEFAULT_PROBS = tuple(round(0.05 * k, 10) for k in range(1, 20))
LAG_BOUND_SLACK = 1.05


@dataclass(frozen=True)
class WorstCase:
    u: float
    r: int
    s: int
    x: float
    y: float
    sup_diff: float
    denom: float
    ratio: float


@dataclass(frozen=True)
class LocalStationarityCertificate:
    """Grid-certified Lipschitz-type constant for the array/family coupling.

    L_hat is the max over the declared (u, r, s) grid of the lattice sup of
    |F_{r,s}(x, y) - G^u_{r-s}(x, y)| divided by
    max(|r/T - u|, |s/T - u|) + 1/T.
    """

    L_hat: float
    T: int
    u_grid: tuple
    window: int
    probs: tuple
    worst_case: WorstCase


def certify_local_stationarity(model: TriangularArrayModel,
                               u_grid=DEFAULT_U_GRID,
                               window: int | None = None,
                               probs=DEFAULT_PROBS) -> LocalStationarityCertificate:
    """Evaluate the local-stationarity ratio on the declared grid.

    For each u the (r, s) indices range over a window of half-width
    ceil(T^(1/3)) around floor(uT) (clipped to [1, T]); the (x, y) lattice
    sits at the family marginal quantiles of orders ``probs``.
    """
    T = model.T
    if window is None:
        window = ceil_root(T, 1, 3)
    z = ndtri(np.asarray(probs, dtype=float))
    zx, zy = np.meshgrid(z, z, indexing="ij")
    best: WorstCase | None = None
    for u in u_grid:
        fam = model.family_at(u)
        sd_u = fam.marginal_sd
        t0 = math.floor(u * T)
        lo = max(1, t0 - window)
        hi = min(T, t0 + window)
        idx = range(lo, hi + 1)
        sds = {t: model.marginal_sd(t) for t in idx}
        # family CDF on the lattice, one per lag actually occurring
        fam_cdf = {}
        for d in range(0, hi - lo + 1):
            fam_cdf[d] = bvn_cdf(zx, zy, fam.corr(d)) if d > 0 else None
        for r in idx:
            for s in idx:
                d = abs(r - s)
                # lattice points x = sd_u * z evaluated under both laws
                if r == s:
                    # degenerate diagonal: F(x,y) = P(X_r <= min(x,y)), same for G
                    f_vals = ndtr(np.minimum(zx, zy) * (sd_u / sds[r]))
                    g_vals = ndtr(np.minimum(zx, zy))
                else:
                    rho = model.correlation(r, s)
                    f_vals = bvn_cdf(zx * (sd_u / sds[r]), zy * (sd_u / sds[s]), rho)
                    g_vals = fam_cdf[d]
                diff = np.abs(f_vals - g_vals)
                k = int(np.argmax(diff))
                sup_diff = float(diff.flat[k])
                denom = max(abs(r / T - u), abs(s / T - u)) + 1.0 / T
                ratio = sup_diff / denom
                if best is None or ratio > best.ratio:
                    ix, iy = np.unravel_index(k, diff.shape)
                    best = WorstCase(
                        u=float(u),
                        r=r,
                        s=s,
                        x=float(sd_u * z[ix]),
                        y=float(sd_u * z[iy]),
                        sup_diff=sup_diff,
                        denom=denom,
                        ratio=ratio,
                    )
    return LocalStationarityCertificate(
        L_hat=best.ratio,
        T=T,
        u_grid=tuple(float(u) for u in u_grid),
        window=window,
        probs=tuple(float(p) for p in probs),
        worst_case=best,
    )


@dataclass(frozen=True)
class BoundRow:
    T: int
    u: float
    h: int
    tau1: float
    tau2: float
    lhs: float
    rhs: float
    ok: bool


def check_lag_bound(model: TriangularArrayModel, u: float, H: int, tau_grid,
                    L_hat: float, slack: float = LAG_BOUND_SLACK) -> list[BoundRow]:
    """Ledger of the lag-level deviation bound at t0 = floor(uT):
    lhs = |gamma^u_h - gamma_{t0}(h)|, rhs = slack * 3 L_hat (|h| + 2) / T."""
    T = model.T
    t0 = math.floor(u * T)
    fam = model.family_at(u)
    taus = [float(t) for t in tau_grid]
    rows = []
    for h in range(-H, H + 1):
        rhs = slack * 3.0 * L_hat * (abs(h) + 2) / T
        for t1 in taus:
            for t2 in taus:
                lhs = abs(
                    indicator_cov_stationary(fam, h, t1, t2)
                    - indicator_cov_array(model, t0, h, t1, t2)
                )
                rows.append(
                    BoundRow(T=T, u=float(u), h=h, tau1=t1, tau2=t2,
                             lhs=lhs, rhs=rhs, ok=lhs <= rhs)
                )
    return rows


@dataclass
class ConvergenceReport:
    """Per-T distances and certificates; parts not produced by a given sweep
    stay None and are merged by the experiment runner."""

    Ts: list
    u: float
    tau_pairs: tuple | None = None
    H_per_T: list = field(default_factory=list)
    sup_distances: np.ndarray | None = None  # (nT, n_pairs)
    sup_reference: np.ndarray | None = None  # (n_pairs,)
    sup_strictly_decreasing: list | None = None
    sup_final_ratio: np.ndarray | None = None
    l2_Ts: list | None = None
    l2_distances: np.ndarray | None = None  # (n l2_Ts,)
    l2_decreasing: bool | None = None
    bound_ledger: list = field(default_factory=list)
    K_hat: float | None = None
    L_hat: float | None = None


def sup_convergence_sweep(model: TriangularArrayModel, Ts, u: float, tau_pairs,
                          grid: FrequencyGrid) -> ConvergenceReport:
    """Uniform distance between the stationary copula spectrum at u and the
    array's Wigner-Ville quantile spectrum at t0 = floor(uT), per T.

    The reference spectrum uses the near-exact stationary truncation; each
    Wigner-Ville spectrum truncates at H(T) = ceil(T^(1/3)).
    """
    Ts = [int(T) for T in Ts]
    if any(T < 64 for T in Ts) or any(b <= a for a, b in zip(Ts, Ts[1:])):
        raise ValueError("Ts must be strictly increasing and each >= 64")
    fam = StationaryFamilyModel(u=u, a=model.curve(u), innovation_sd=model.innovation_sd)
    reference = copula_tv_spectrum(fam, tau_pairs, grid)
    sup_ref = np.max(np.abs(reference.values), axis=1)
    dists = np.empty((len(Ts), len(reference.tau_pairs)))
    Hs = []
    for i, T in enumerate(Ts):
        arr = TriangularArrayModel(curve=model.curve, T=T, innovation_sd=model.innovation_sd)
        H = ceil_root(T, 1, 3)
        Hs.append(H)
        wv = wv_quantile_spectrum(arr, math.floor(u * T), tau_pairs, grid, H=H)
        dists[i] = sup_distance_per_pair(reference, wv)
    decreasing = [bool(np.all(np.diff(dists[:, j]) < 0.0)) for j in range(dists.shape[1])]
    final_ratio = dists[-1] / sup_ref
    return ConvergenceReport(
        Ts=Ts,
        u=float(u),
        tau_pairs=reference.tau_pairs,
        H_per_T=Hs,
        sup_distances=dists,
        sup_reference=sup_ref,
        sup_strictly_decreasing=decreasing,
        sup_final_ratio=final_ratio,
    )


@dataclass(frozen=True)
class SummabilityReport:
    H_list: tuple
    tau_pairs: tuple
    partial_stationary: np.ndarray  # (nH, n_pairs)
    partial_array: np.ndarray  # (nH, n_pairs)
    K_hat: float
    budget_stationary: float
    budget_array: float
    increment_certificate_ok: bool
    ok: bool


def _increment_bound(sup_abs: float, h: int, kind: str) -> float:
    """Provable bound on |gamma_h| + |gamma_{-h}| from the Lipschitz constant
    of the Gaussian copula in rho over [-rho_max, rho_max]."""
    r = min(_rho_envelope(sup_abs, h, kind), 0.999999)
    lip = 1.0 / (_TWO_PI * math.sqrt(1.0 - r * r))
    return 2.0 * min(0.25, r * lip)


def summability_check(model: TriangularArrayModel, u: float, H_list, tau_grid_pairs):
    """Partial absolute sums of both kernels over |h| <= H for H in H_list.

    Returns a SummabilityReport: K_hat is the largest observed partial sum,
    checked against the analytic geometric budgets; per-lag increments are
    checked against the geometric-decay certificate.
    """
    H_list = tuple(int(H) for H in H_list)
    H_max = max(H_list)
    fam = model.family_at(u)
    t0 = math.floor(u * model.T)
    pairs = tuple((float(a), float(b)) for a, b in tau_grid_pairs)
    sup_abs = model.curve.sup_abs
    # per-lag absolute contributions, lag 0..H_max
    abs_stat = np.empty((H_max + 1, len(pairs)))
    abs_arr = np.empty((H_max + 1, len(pairs)))
    for j, (t1, t2) in enumerate(pairs):
        abs_stat[0, j] = abs(indicator_cov_stationary(fam, 0, t1, t2))
        abs_arr[0, j] = abs(indicator_cov_array(model, t0, 0, t1, t2))
        for h in range(1, H_max + 1):
            abs_stat[h, j] = abs(indicator_cov_stationary(fam, h, t1, t2)) + abs(
                indicator_cov_stationary(fam, -h, t1, t2)
            )
            abs_arr[h, j] = abs(indicator_cov_array(model, t0, h, t1, t2)) + abs(
                indicator_cov_array(model, t0, -h, t1, t2)
            )
    cums_stat = np.cumsum(abs_stat, axis=0)
    cums_arr = np.cumsum(abs_arr, axis=0)
    partial_stat = np.stack([cums_stat[H] for H in H_list])
    partial_arr = np.stack([cums_arr[H] for H in H_list])
    K_hat = float(max(partial_stat.max(), partial_arr.max()))
    budget_stat = geometric_budget(sup_abs, "stationary")
    budget_arr = geometric_budget(sup_abs, "array")
    inc_ok = True
    for h in range(1, H_max + 1):
        if np.max(abs_stat[h]) > _increment_bound(sup_abs, h, "stationary") + 1e-12:
            inc_ok = False
        if np.max(abs_arr[h]) > _increment_bound(sup_abs, h, "array") + 1e-12:
            inc_ok = False
    ok = (
        float(partial_stat.max()) <= budget_stat + 1e-12
        and float(partial_arr.max()) <= budget_arr + 1e-12
        and inc_ok
    )
    return SummabilityReport(
        H_list=H_list,
        tau_pairs=pairs,
        partial_stationary=partial_stat,
        partial_array=partial_arr,
        K_hat=K_hat,
        budget_stationary=budget_stat,
        budget_array=budget_arr,
        increment_certificate_ok=inc_ok,
        ok=ok,
    )


def l2_convergence_sweep(model: TriangularArrayModel, Ts, u: float,
                         grid: FrequencyGrid) -> ConvergenceReport:
    """Classical analog of the uniform-distance sweep: squared L2 distance
    between the raw Wigner-Ville covariance sum f_T and 2 pi times the
    closed-form spectrum, normalized by (2 pi)^2, per T."""
    Ts = [int(T) for T in Ts]
    if any(b <= a for a, b in zip(Ts, Ts[1:])):
        raise ValueError("Ts must be strictly increasing")
    fam = StationaryFamilyModel(u=u, a=model.curve(u), innovation_sd=model.innovation_sd)
    f_closed = classical_tv_spectrum(fam, grid)
    scaled = SpectrumGrid(
        omegas=f_closed.omegas,
        values=_TWO_PI * f_closed.values,
        tau_pairs=None,
        provenance=f_closed.provenance,
    )
    dists = np.empty(len(Ts))
    Hs = []
    for i, T in enumerate(Ts):
        arr = TriangularArrayModel(curve=model.curve, T=T, innovation_sd=model.innovation_sd)
        H = ceil_root(T, 1, 3)
        Hs.append(H)
        f_T = classical_wv_spectrum(arr, u, grid, H=H)
        dists[i] = float(l2_distance_per_pair(f_T, scaled)[0]) / (_TWO_PI**2)
    return ConvergenceReport(
        Ts=Ts,
        u=float(u),
        H_per_T=Hs,
        l2_Ts=Ts,
        l2_distances=dists,
        l2_decreasing=bool(np.all(np.diff(dists) < 0.0)),
    )


# -- report serialization -----------------------------------------------------

REPORT_CSV_HEADER = [
    "report_type", "T", "u", "tau1", "tau2", "h", "omega_or_blank", "value", "bound", "ok",
]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def report_rows(report: ConvergenceReport) -> list[list[str]]:
    """Flatten a merged report into the declared CSV row schema."""
    rows = []

    def add(report_type, T=None, u=None, tau1=None, tau2=None, h=None,
            omega=None, value=None, bound=None, ok=None):
        rows.append(
            [report_type, _fmt(T), _fmt(u), _fmt(tau1), _fmt(tau2), _fmt(h),
             _fmt(omega), _fmt(value), _fmt(bound), _fmt(ok)]
        )

    if report.sup_distances is not None:
        for j, (t1, t2) in enumerate(report.tau_pairs):
            prev = None
            for i, T in enumerate(report.Ts):
                d = float(report.sup_distances[i, j])
                ok = True if prev is None else d < prev
                add("sup_distance", T=T, u=report.u, tau1=t1, tau2=t2,
                    value=d, bound=prev, ok=ok)
                prev = d
            add("sup_final_ratio", T=report.Ts[-1], u=report.u, tau1=t1, tau2=t2,
                value=float(report.sup_final_ratio[j]), bound=0.01,
                ok=float(report.sup_final_ratio[j]) < 0.01)
    if report.l2_distances is not None:
        prev = None
        l2_Ts = report.l2_Ts if report.l2_Ts is not None else report.Ts
        for i, T in enumerate(l2_Ts):
            d = float(report.l2_distances[i])
            ok = True if prev is None else d < prev
            add("l2_distance", T=T, u=report.u, value=d, bound=prev, ok=ok)
            prev = d
    for row in report.bound_ledger:
        add("lag_bound", T=row.T, u=row.u, tau1=row.tau1, tau2=row.tau2, h=row.h,
            value=row.lhs, bound=row.rhs, ok=row.ok)
    if report.K_hat is not None:
        add("summability_K", u=report.u, value=report.K_hat, ok=True)
    if report.L_hat is not None:
        add("local_stationarity_L", u=report.u, value=report.L_hat,
            ok=math.isfinite(report.L_hat))
    return rows
