"""Fourier summation engines for the five spectral objects.

* ``copula_tv_spectrum``   -- time-varying copula spectral density of the
  stationary approximating family (complex, per tau pair).
* ``wv_quantile_spectrum`` -- Wigner-Ville spectrum of the array's quantile
  indicator series (truncated symmetric-lag sum around a center t0).
* ``classical_tv_spectrum`` -- ordinary AR(1) spectral density in closed form.
* ``classical_wv_spectrum`` -- Wigner-Ville sum of raw array covariances
  (no 2 pi factor; that normalization mismatch is kept literal).
* ``discrete_wigner``      -- discrete pseudo-Wigner distribution of a
  deterministic complex signal (integer half-lags, doubled frequency phase).

Sums accumulate from the largest |lag| down to lag 0 to limit cancellation
error.  Frequency integrals use the periodic trapezoid rule on (-pi, pi],
which on the canonical Fourier grid is the exact rectangle rule.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .copula import geometric_tail, indicator_cov_array, indicator_cov_stationary, _check_tau_pair
from .exceptions import GridMismatchError
from .models import StationaryFamilyModel, TriangularArrayModel, ceil_root

_TWO_PI = 2.0 * math.pi

#: Default number of Fourier frequencies.
DEFAULT_N_FREQ = 512

#: Target for the automatic stationary truncation rule (spectrum-scale tail).
_AUTO_TAIL = 1e-10


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing frequencies in (-pi, pi]."""

    omegas: np.ndarray

    def __post_init__(self):
        om = np.asarray(self.omegas, dtype=float)
        if om.ndim != 1 or len(om) == 0:
            raise ValueError("omegas must be a nonempty 1-d array")
        if np.any(np.diff(om) <= 0):
            raise ValueError("omegas must be strictly increasing")
        if om[0] <= -math.pi or om[-1] > math.pi:
            raise ValueError("omegas must lie in (-pi, pi]")
        object.__setattr__(self, "omegas", om)
        om.setflags(write=False)

    def __len__(self):
        return len(self.omegas)

    @classmethod
    def fourier(cls, n: int = DEFAULT_N_FREQ) -> "FrequencyGrid":
        """Fourier frequencies 2 pi j / n for integer j in (-n/2, n/2]."""
        if n < 1:
            raise ValueError("n must be positive")
        js = np.arange(n // 2 - n + 1, n // 2 + 1)
        return cls(omegas=2.0 * math.pi * js / n)


@dataclass(frozen=True)
class Provenance:
    kind: str  # copula_tv | wv_quantile | classical_tv | classical_wv | wigner_signal | estimator
    u: float | None = None
    t0: int | None = None
    T: int | None = None
    H: int | None = None


@dataclass(frozen=True)
class SpectrumGrid:
    """Complex spectrum over (tau pair, omega); tau_pairs is None for the
    classical and deterministic-signal spectra (values are then 1-d)."""

    omegas: np.ndarray
    values: np.ndarray
    tau_pairs: tuple | None
    provenance: Provenance
    tail_bound: float | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "values", vals)
        expected = (len(self.omegas),) if self.tau_pairs is None else (
            len(self.tau_pairs),
            len(self.omegas),
        )
        if vals.shape != expected:
            raise ValueError(f"values shape {vals.shape} != expected {expected}")
        vals.setflags(write=False)

    @property
    def is_classical(self) -> bool:
        return self.tau_pairs is None

    def integrate(self):
        """Periodic trapezoid integral over (-pi, pi] per tau pair."""
        w = _periodic_weights(self.omegas)
        if self.is_classical:
            return complex(self.values @ w)
        return self.values @ w

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        p = self.provenance
        u_or_t0 = p.t0 if p.t0 is not None else p.u
        u_field = "" if u_or_t0 is None else f"{u_or_t0:.17g}"
        t_field = "" if p.T is None else str(p.T)
        h_field = "" if p.H is None else str(p.H)
        if self.is_classical:
            w.writerow(["provenance", "u_or_t0", "T", "H", "omega", "re", "im"])
            for k, om in enumerate(self.omegas):
                v = self.values[k]
                w.writerow(
                    [p.kind, u_field, t_field, h_field, f"{om:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"]
                )
        else:
            w.writerow(["provenance", "u_or_t0", "T", "H", "omega", "tau1", "tau2", "re", "im"])
            for j, (t1, t2) in enumerate(self.tau_pairs):
                for k, om in enumerate(self.omegas):
                    v = self.values[j, k]
                    w.writerow(
                        [
                            p.kind,
                            u_field,
                            t_field,
                            h_field,
                            f"{om:.17g}",
                            f"{t1:.17g}",
                            f"{t2:.17g}",
                            f"{v.real:.17g}",
                            f"{v.imag:.17g}",
                        ]
                    )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SpectrumGrid":
        rows = list(csv.reader(io.StringIO(text)))
        header = rows[0]
        body = rows[1:]
        classical = header == ["provenance", "u_or_t0", "T", "H", "omega", "re", "im"]
        if not classical and header != [
            "provenance", "u_or_t0", "T", "H", "omega", "tau1", "tau2", "re", "im",
        ]:
            raise ValueError("unexpected spectrum CSV header")
        kind = body[0][0]
        u_or_t0 = float(body[0][1]) if body[0][1] else None
        T = int(body[0][2]) if body[0][2] else None
        H = int(body[0][3]) if body[0][3] else None
        if kind in ("wv_quantile", "wigner_signal"):
            prov = Provenance(kind=kind, t0=None if u_or_t0 is None else int(u_or_t0), T=T, H=H)
        else:
            prov = Provenance(kind=kind, u=u_or_t0, T=T, H=H)
        if classical:
            omegas = np.array([float(r[4]) for r in body])
            values = np.array([complex(float(r[5]), float(r[6])) for r in body])
            return cls(omegas=omegas, values=values, tau_pairs=None, provenance=prov)
        omegas = []
        pairs = []
        for r in body:
            om = float(r[4])
            if not omegas or om > omegas[-1]:
                omegas.append(om)
            pair = (float(r[5]), float(r[6]))
            if pair not in pairs:
                pairs.append(pair)
        omegas = np.array(omegas)
        values = np.empty((len(pairs), len(omegas)), dtype=complex)
        n_om = len(omegas)
        for idx, r in enumerate(body):
            j, k = divmod(idx, n_om)
            values[j, k] = complex(float(r[7]), float(r[8]))
        return cls(omegas=omegas, values=values, tau_pairs=tuple(pairs), provenance=prov)


def _periodic_weights(omegas: np.ndarray) -> np.ndarray:
    """Trapezoid weights on (-pi, pi] treated as a circle of length 2 pi."""
    gaps = np.diff(omegas)
    wrap = _TWO_PI - (omegas[-1] - omegas[0])
    w = np.empty_like(omegas)
    if len(omegas) == 1:
        w[0] = _TWO_PI
        return w
    w[1:-1] = 0.5 * (gaps[:-1] + gaps[1:])
    w[0] = 0.5 * (wrap + gaps[0])
    w[-1] = 0.5 * (gaps[-1] + wrap)
    return w


def stationary_truncation(a_abs: float, tol: float = _AUTO_TAIL) -> int:
    """Smallest H >= 1 whose geometric spectrum tail bound is below tol."""
    a_abs = abs(float(a_abs))
    if a_abs == 0.0:
        return 1
    H = 1
    while a_abs ** (H + 1) / (math.pi * (1.0 - a_abs)) >= tol:
        H += 1
    return H


def _exact_stationary_tail(model: StationaryFamilyModel, H: int, tau_pairs) -> float:
    """Spectrum-scale truncation tail: (2/2pi) sum_{h>H} |gamma_h|, summed
    exactly out to the near-machine horizon with a geometric remainder."""
    a_abs = abs(model.a)
    if a_abs == 0.0:
        return 0.0
    far = max(H + 1, stationary_truncation(a_abs, 1e-13))
    worst = 0.0
    for t1, t2 in tau_pairs:
        s = 0.0
        for h in range(H + 1, far + 1):
            s += abs(indicator_cov_stationary(model, h, t1, t2))
        s += min(0.25, a_abs ** (far + 1)) / (1.0 - a_abs)
        worst = max(worst, s)
    return 2.0 * worst / _TWO_PI


def copula_tv_spectrum(model: StationaryFamilyModel, tau_pairs, grid: FrequencyGrid,
                       H: int | None = None) -> SpectrumGrid:
    """Time-varying copula spectral density of the stationary family member:
    (2 pi)^-1 sum_{|h| <= H} gamma_h(tau1, tau2) e^{-i h omega}.

    With H omitted, the truncation is chosen so the geometric tail bound is
    below 1e-10.  The exact truncation tail is reported as metadata.
    """
    pairs = tuple(_check_tau_pair(t1, t2) for t1, t2 in tau_pairs)
    if H is None:
        H = stationary_truncation(abs(model.a))
    if H < 1:
        raise ValueError("H must be >= 1")
    om = grid.omegas
    values = np.zeros((len(pairs), len(om)), dtype=complex)
    # gamma is even in h here: the family autocorrelation is even and the
    # Gaussian copula is exchange-symmetric, so the +h and -h terms merge
    # into 2 gamma_h cos(h omega).  Largest lags first.
    for h in range(H, 0, -1):
        cos_h = 2.0 * np.cos(h * om)
        for j, (t1, t2) in enumerate(pairs):
            values[j] += indicator_cov_stationary(model, h, t1, t2) * cos_h
    for j, (t1, t2) in enumerate(pairs):
        values[j] += indicator_cov_stationary(model, 0, t1, t2)
    values /= _TWO_PI
    return SpectrumGrid(
        omegas=om,
        values=values,
        tau_pairs=pairs,
        provenance=Provenance(kind="copula_tv", u=model.u, H=H),
        tail_bound=_exact_stationary_tail(model, H, pairs),
    )


def wv_quantile_spectrum(model: TriangularArrayModel, t0: int, tau_pairs,
                         grid: FrequencyGrid, H: int | None = None) -> SpectrumGrid:
    """Wigner-Ville spectrum of the array's quantile indicators at center t0:
    (2 pi)^-1 sum_{|s| <= H} gamma_{t0}(s, tau1, tau2) e^{-i omega s},
    H defaulting to ceil(T^(1/3))."""
    pairs = tuple(_check_tau_pair(t1, t2) for t1, t2 in tau_pairs)
    if H is None:
        H = ceil_root(model.T, 1, 3)
    if H < 0:
        raise ValueError("H must be >= 0")
    om = grid.omegas
    values = np.zeros((len(pairs), len(om)), dtype=complex)
    for s in range(H, 0, -1):
        phase_pos = np.exp(-1j * s * om)
        phase_neg = np.conj(phase_pos)
        for j, (t1, t2) in enumerate(pairs):
            values[j] += indicator_cov_array(model, t0, s, t1, t2) * phase_pos
            values[j] += indicator_cov_array(model, t0, -s, t1, t2) * phase_neg
    for j, (t1, t2) in enumerate(pairs):
        values[j] += indicator_cov_array(model, t0, 0, t1, t2)
    values /= _TWO_PI
    tail = geometric_tail(model.curve.sup_abs, H, "array") / math.pi
    return SpectrumGrid(
        omegas=om,
        values=values,
        tau_pairs=pairs,
        provenance=Provenance(kind="wv_quantile", t0=int(t0), T=model.T, H=H),
        tail_bound=tail,
    )


def classical_tv_spectrum(model: StationaryFamilyModel, grid: FrequencyGrid) -> SpectrumGrid:
    """Ordinary time-varying spectral density of the AR(1) family member,
    in closed form: sigma^2 / (2 pi |1 - a e^{-i omega}|^2)."""
    om = grid.omegas
    denom = np.abs(1.0 - model.a * np.exp(-1j * om)) ** 2
    values = model.innovation_sd**2 / (_TWO_PI * denom)
    return SpectrumGrid(
        omegas=om,
        values=values.astype(complex),
        tau_pairs=None,
        provenance=Provenance(kind="classical_tv", u=model.u),
    )


def classical_wv_spectrum(model: TriangularArrayModel, u: float, grid: FrequencyGrid,
                          H: int | None = None) -> SpectrumGrid:
    """Wigner-Ville sum of raw array covariances centered at rescaled time u:
    sum_{|s| <= H} Cov(X[floor(uT - s/2)], X[floor(uT + s/2)]) e^{-i omega s}.

    Note there is no (2 pi)^-1 factor here; comparisons against the closed
    form must scale by 2 pi."""
    if H is None:
        H = ceil_root(model.T, 1, 3)
    om = grid.omegas
    center = u * model.T
    values = np.zeros(len(om), dtype=complex)
    for s in range(H, 0, -1):
        i_neg = math.floor(center - s / 2.0)
        i_pos = math.floor(center + s / 2.0)
        cov = model.cross_cov(i_neg, i_pos)
        phase_pos = np.exp(-1j * s * om)
        values += cov * phase_pos
        i_neg2 = math.floor(center + s / 2.0)
        i_pos2 = math.floor(center - s / 2.0)
        cov2 = model.cross_cov(i_neg2, i_pos2)
        values += cov2 * np.conj(phase_pos)
    values += model.cross_cov(math.floor(center), math.floor(center))
    return SpectrumGrid(
        omegas=om,
        values=values,
        tau_pairs=None,
        provenance=Provenance(kind="classical_wv", u=u, T=model.T, H=H),
    )


def discrete_wigner(signal, t: int, grid: FrequencyGrid) -> SpectrumGrid:
    """Discrete pseudo-Wigner row of a deterministic complex signal at time t:
    (2 pi)^-1 sum_tau conj(s[t - tau]) s[t + tau] e^{-2 i tau omega},
    tau clipped so both indices stay in range.

    The conjugate pairing of +/-tau makes the row real up to rounding; the
    complex accumulation is returned so that cancellation is observable.
    """
    sig = np.asarray(signal, dtype=complex)
    n = len(sig)
    if not 0 <= t < n:
        raise IndexError(f"t = {t} outside signal range [0, {n})")
    m = min(t, n - 1 - t)
    om = grid.omegas
    if m < 0:
        values = np.zeros(len(om), dtype=complex)
    else:
        taus = np.arange(-m, m + 1)
        prods = np.conj(sig[t - taus]) * sig[t + taus]
        phases = np.exp(-2j * np.outer(taus, om))
        values = (prods @ phases) / _TWO_PI
    return SpectrumGrid(
        omegas=om,
        values=values,
        tau_pairs=None,
        provenance=Provenance(kind="wigner_signal", t0=int(t)),
    )


def _check_same_grid(a: SpectrumGrid, b: SpectrumGrid):
    if a.values.shape != b.values.shape or not np.array_equal(a.omegas, b.omegas):
        raise GridMismatchError("spectra live on different frequency grids")
    if (a.tau_pairs is None) != (b.tau_pairs is None):
        raise GridMismatchError("cannot compare classical and tau-indexed spectra")
    if a.tau_pairs is not None and tuple(a.tau_pairs) != tuple(b.tau_pairs):
        raise GridMismatchError("spectra carry different tau pairs")


def sup_distance_per_pair(a: SpectrumGrid, b: SpectrumGrid) -> np.ndarray:
    """max_omega |A - B| for each tau pair (1-element array for classical)."""
    _check_same_grid(a, b)
    diff = np.abs(a.values - b.values)
    if a.is_classical:
        return np.array([float(np.max(diff))])
    return np.max(diff, axis=1)


def sup_distance(a: SpectrumGrid, b: SpectrumGrid) -> float:
    """Uniform distance over the grid (max over tau pairs and omega)."""
    return float(np.max(sup_distance_per_pair(a, b)))


def l2_distance_per_pair(a: SpectrumGrid, b: SpectrumGrid) -> np.ndarray:
    """Periodic-trapezoid integral of |A - B|^2 over omega, per tau pair."""
    _check_same_grid(a, b)
    w = _periodic_weights(a.omegas)
    diff2 = np.abs(a.values - b.values) ** 2
    if a.is_classical:
        return np.array([float(diff2 @ w)])
    return diff2 @ w


def l2_distance(a: SpectrumGrid, b: SpectrumGrid) -> float:
    """Squared L2 distance int |A - B|^2 domega (max over tau pairs)."""
    return float(np.max(l2_distance_per_pair(a, b)))
