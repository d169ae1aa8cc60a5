"""Coupling-constant expansion and the small multiplicity-3 band law.

The monodromy of the operator with coefficients (eps*p, eps*q) expands in
powers of eps with matrix coefficients given by iterated integrals against
the constant-coefficient propagator e^{tP}.  The first-order trace vanishes
for mean-zero p; the real part of the second-order trace at the origin is
-3h, where h is the Fourier invariant that decides whether a small band of
multiplicity 3 opens.  The predicted band has width 4 h^{3/2} eps^3 around
a center fixed by the imaginary parts of the second and third order traces.

Pure computations throughout; sweeps over coupling values parallelize
trivially across workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial, inf

import numpy as np

from .coeffs import Coefficients, kappa
from .errors import UnsupportedOrder
from .monodromy import OMEGA, point, points_many
from .spectrum_scan import BandReport, ScanOptions, scan_s3

_OMEGA_POW = np.array([1.0, OMEGA, OMEGA * OMEGA])
_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL_CACHE[n]


# --------------------------------------------------------------------------
# constant-coefficient propagator e^{tP}
# --------------------------------------------------------------------------

def _expP_factory(lam: complex):
    """Batched t -> e^{tP} for fixed lambda.

    e^{tP} = a0 I + a1 P + a2 P^2 with scalar series a_r; for small |lambda|
    the power series in (-i lam) t^3 is used directly (the eigenbasis
    degenerates at the origin), otherwise the three exponential modes are
    recombined through the inverse Vandermonde of the eigenvalues.
    """
    lam = complex(lam)
    I3 = np.eye(3, dtype=complex)
    P = np.array([[0, 1, 0], [0, 0, 1], [-1j * lam, 0, 0]], dtype=complex)
    P2 = P @ P
    if abs(lam) <= 1.0:
        jmax = 1
        while abs(lam) ** jmax / factorial(3 * jmax) > 1e-20 and jmax < 12:
            jmax += 1

        def expP(ts: np.ndarray) -> np.ndarray:
            ts = np.asarray(ts, dtype=float)
            out = np.zeros(ts.shape + (3, 3), dtype=complex)
            for r, B in enumerate((I3, P, P2)):
                a = np.zeros(ts.shape, dtype=complex)
                for j in range(jmax + 1):
                    a += (-1j * lam) ** j * ts ** (3 * j + r) / factorial(3 * j + r)
                out += a[..., None, None] * B
            return out

    else:
        z = point(lam).z
        ks = 1j * z * _OMEGA_POW
        V = np.vander(ks, 3, increasing=True)  # rows (1, k, k^2)
        L = np.linalg.inv(V)  # a = L @ exp(k t)

        def expP(ts: np.ndarray) -> np.ndarray:
            ts = np.asarray(ts, dtype=float)
            ek = np.exp(ts[..., None] * ks)  # (..., 3)
            a = ek @ L.T  # (..., 3) -> a_r
            return (
                a[..., 0, None, None] * I3
                + a[..., 1, None, None] * P
                + a[..., 2, None, None] * P2
            )

    return expP


def _q_apply(c: Coefficients, ts: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Q(t) @ X without forming Q: rows (0, -p x0, i q x0 - p x1)."""
    p, q = c.pq_values(ts)
    out = np.zeros_like(X)
    out[..., 1, :] = -p[..., None] * X[..., 0, :]
    out[..., 2, :] = 1j * q[..., None] * X[..., 0, :] - p[..., None] * X[..., 1, :]
    return out


# --------------------------------------------------------------------------
# series terms
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EpsilonSeries:
    """Coupling-series matrices M_0..M_N at fixed lambda with their traces.

    epsilon_radius_hint = 1/kappa marks where the remainder envelope
    |eps|^N kappa^N e^{z0+|eps| kappa} stops contracting.
    """

    lam: complex
    terms: tuple[np.ndarray, ...]
    traces: tuple[complex, ...]
    epsilon_radius_hint: float


def epsilon_terms(
    c: Coefficients, lam: complex, N: int, nodes: int = 96
) -> EpsilonSeries:
    """First N+1 coupling-series matrices at lambda by nested quadrature.

    Depth N <= 4; each level integrates e^{(t-s)P} Q(s) against the previous
    term with Gauss-Legendre nodes (the top levels use the full budget, the
    fourth level a reduced one to bound the tensor size).
    """
    if N < 0:
        raise UnsupportedOrder("N must be >= 0")
    if N > 4:
        raise UnsupportedOrder("N <= 4 supported")
    expP = _expP_factory(lam)
    level_nodes = [nodes, nodes, nodes, max(24, nodes // 2)]

    def term(n: int, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if n == 0:
            return expP(ts)
        if ts.size > 1024 and n >= 2:
            flat = ts.ravel()
            parts = [
                term(n, chunk)
                for chunk in np.array_split(flat, max(1, flat.size // 1024))
            ]
            return np.concatenate(parts, axis=0).reshape(*ts.shape, 3, 3)
        x, w = _gl(level_nodes[n - 1])
        s = ts[..., None] * x  # (..., m)
        inner = term(n - 1, s)
        integrand = expP(ts[..., None] - s) @ _q_apply(c, s, inner)
        return ts[..., None, None] * np.einsum("m,...mij->...ij", w, integrand)

    one = np.array(1.0)
    terms = [term(n, one)[()] for n in range(N + 1)]
    kap = kappa(c).value
    return EpsilonSeries(
        lam=complex(lam),
        terms=tuple(terms),
        traces=tuple(complex(np.trace(t)) for t in terms),
        epsilon_radius_hint=float(1.0 / kap) if kap > 0 else inf,
    )


def term_envelope(c: Coefficients, lam: complex, n: int) -> float:
    """Bound e^{z0} kappa^n / n! on the n-th series matrix."""
    _, z0 = points_many(np.array([lam], dtype=complex))
    kap = kappa(c).value
    return float(np.exp(z0[0]) * kap**n / factorial(n))


# --------------------------------------------------------------------------
# band prediction and measurement
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BandPrediction:
    """Predicted small band of multiplicity 3 at coupling eps.

    kind is 'band' (h > 0), 'empty' (h < 0), or 'inconclusive' (h = 0, not
    covered by the law).  Endpoints are center +- 2 h^{3/2} eps^3 around the
    second/third-order center shift.
    """

    epsilon: float
    h: float
    b2: float
    b3: float
    center: float
    r_minus: float
    r_plus: float
    width_leading: float
    kind: str


def predict_band(c: Coefficients, epsilon: float) -> BandPrediction:
    """Leading-order band prediction at coupling epsilon (mean-zero p required)."""
    h = c.invariant_h()  # raises NonzeroPMean when the mean of p survives
    series = epsilon_terms(c, 0.0, 3)
    b2 = float(series.traces[2].imag)
    b3 = float(series.traces[3].imag)
    eps = float(epsilon)
    center = 2.0 * b2 * eps**2 + 2.0 * b3 * eps**3
    if h > 0:
        half = 2.0 * h**1.5 * abs(eps) ** 3
        return BandPrediction(
            epsilon=eps, h=h, b2=b2, b3=b3, center=center,
            r_minus=center - half, r_plus=center + half,
            width_leading=2.0 * half, kind="band",
        )
    kind = "empty" if h < 0 else "inconclusive"
    return BandPrediction(
        epsilon=eps, h=h, b2=b2, b3=b3, center=center,
        r_minus=float("nan"), r_plus=float("nan"),
        width_leading=0.0, kind=kind,
    )


@dataclass(frozen=True)
class MeasuredBand:
    """Scan outcome around the predicted center at one coupling value."""

    prediction: BandPrediction
    interval: tuple[float, float] | None
    width: float
    width_ratio: float
    report: BandReport


def measure_band(
    c: Coefficients,
    epsilon: float,
    grid: int = 512,
    window_factor: float = 10.0,
    min_window: float = 1e-8,
) -> MeasuredBand:
    """Scan the coefficients scaled by epsilon around the predicted center.

    The window is window_factor times the predicted width (with an absolute
    floor) centered on the second/third-order center, wide enough to absorb
    the O(eps^4) center error.  Returns the measured interval, or None when
    the scan finds no negative region (the h < 0 and degenerate cases).
    """
    pred = predict_band(c, epsilon)
    wscale = 4.0 * abs(pred.h) ** 1.5 * abs(epsilon) ** 3
    window_width = max(window_factor * wscale, min_window)
    window = (pred.center - window_width / 2.0, pred.center + window_width / 2.0)
    report = scan_s3(c.scaled(epsilon), window, grid=grid, opts=ScanOptions())
    proper = [iv for iv in report.intervals if iv[1] > iv[0]]
    if not proper:
        return MeasuredBand(
            prediction=pred, interval=None, width=0.0,
            width_ratio=float("nan"), report=report,
        )
    best = max(proper, key=lambda iv: iv[1] - iv[0])
    width = best[1] - best[0]
    ratio = width / pred.width_leading if pred.width_leading > 0 else float("nan")
    return MeasuredBand(
        prediction=pred, interval=best, width=float(width),
        width_ratio=float(ratio), report=report,
    )


def width_law_fit(measured: list[MeasuredBand]) -> tuple[float, float]:
    """(exponent, prefactor) of width = C eps^s from measured nonempty bands."""
    eps = np.array([m.prediction.epsilon for m in measured if m.interval])
    ws = np.array([m.width for m in measured if m.interval])
    if eps.size < 2:
        raise ValueError("need at least two nonempty measurements")
    s, logc = np.polyfit(np.log(eps), np.log(ws), 1)
    return float(s), float(np.exp(logc))
