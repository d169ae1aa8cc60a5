"""Monodromy of the third-order periodic system.

The fundamental matrix carries the state (y, y', y'' + p y), so the
propagation matrix splits into a constant companion part P (holding the
spectral parameter) plus a coefficient part Q(t) built from p and q alone;
no derivative of p is ever formed.  Entries grow like exp(z0 t) where z0 is
the dominant growth exponent of the cube-root frame, so the integrator
keeps a separated real log-scale and renormalizes the matrix whenever it
exceeds a threshold.

Everything here is a pure function of its inputs; grids of spectral points
may be propagated by independent workers (or as one vectorized batch, which
is what propagate_many does internally).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coeffs import Coefficients
from .errors import ToleranceNotMet, UnsupportedOrder, ZeroLambda

OMEGA: complex = np.exp(2j * np.pi / 3)
_OMEGA_POW = np.array([1.0, OMEGA, OMEGA * OMEGA])  # (1, w, w^2)

J_MAT = np.array([[0, 0, 1j], [0, -1j, 0], [1j, 0, 0]], dtype=complex)

# coupling matrices of the cube-root-frame system
Q1_MAT = np.array(
    [[-2, OMEGA**2, OMEGA], [1, -2 * OMEGA**2, OMEGA], [1, OMEGA**2, -2 * OMEGA]],
    dtype=complex,
)
Q2_MAT = np.array(
    [[1, 1, 1], [OMEGA, OMEGA, OMEGA], [OMEGA**2, OMEGA**2, OMEGA**2]], dtype=complex
)
U_MAT = np.array([[1, 1, 1], [1, OMEGA, OMEGA**2], [1, OMEGA**2, OMEGA]], dtype=complex) / np.sqrt(3)


# --------------------------------------------------------------------------
# spectral points
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralPoint:
    """A spectral parameter with its principal cube root and frame constants.

    The cube root uses arg(lambda) in (-pi/2, 3pi/2], which places arg(z) in
    (-pi/6, pi/2]; the upper boundary is identified with the lower one.  z0
    is the dominant real exponent max_j Re(i z w^j) = (Im z + sqrt(3) Re z)/2.
    """

    lam: complex
    z: complex
    z0: float


def point(lam: complex) -> SpectralPoint:
    """Principal-branch spectral point; lambda = 0 maps to z = 0, z0 = 0."""
    lam = complex(lam)
    if lam == 0:
        return SpectralPoint(0j, 0j, 0.0)
    a = np.angle(lam)
    if a <= -np.pi / 2:
        a += 2 * np.pi
    z = abs(lam) ** (1.0 / 3.0) * np.exp(1j * a / 3.0)
    z0 = 0.5 * (z.imag + np.sqrt(3.0) * z.real)
    return SpectralPoint(lam, complex(z), float(z0))


def points_many(lams: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (z, z0) for an array of spectral parameters."""
    lams = np.asarray(lams, dtype=complex)
    a = np.angle(lams)
    a = np.where(a <= -np.pi / 2, a + 2 * np.pi, a)
    z = np.where(lams == 0, 0j, np.abs(lams) ** (1.0 / 3.0) * np.exp(1j * a / 3.0))
    z0 = 0.5 * (z.imag + np.sqrt(3.0) * z.real)
    return z, z0


def unperturbed_trace(lams) -> np.ndarray | complex:
    """Zero-coefficient trace: sum of exp(i z w^k) over the three frame rays."""
    z, _ = points_many(np.atleast_1d(np.asarray(lams, dtype=complex)))
    t = sum(np.exp(1j * z * _OMEGA_POW[k]) for k in range(3))
    return t if np.ndim(lams) else complex(t[0])


# --------------------------------------------------------------------------
# integrator
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegratorOptions:
    """Adaptive Runge-Kutta 5(4) controls.

    tolerance is the local relative error per step; the default leaves
    headroom so accumulated global error stays below the 1e-8-level checks
    used downstream.  scaling_threshold triggers the log-scale split.
    """

    tolerance: float = 1e-12
    max_steps: int = 200_000
    scaling_threshold: float = 1e2


_DP_C = (0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0)
_DP_A = (
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_E = (
    71 / 57600,
    0.0,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


def _rhs_plain(t, M, lams, c: Coefficients):
    """(P + Q(t)) M for the state rows (y, y', y'' + p y)."""
    p, q = c.pq_values(t)
    out = np.empty_like(M)
    out[:, 0, :] = M[:, 1, :]
    out[:, 1, :] = M[:, 2, :] - p[:, None] * M[:, 0, :]
    out[:, 2, :] = (1j * (q - lams))[:, None] * M[:, 0, :] - p[:, None] * M[:, 1, :]
    return out


def _propagate_batch(
    c: Coefficients,
    lams: np.ndarray,
    opts: IntegratorOptions,
    scaled: bool = False,
):
    """Propagate the fundamental system over one period for a batch of lambdas.

    Returns (G, s): matrices with separated log-scales, max|G| normalized
    into the scaling contract at the end.  Each batch member advances with
    its own adaptive step; finished members drop out of the active set.
    """
    lams = np.asarray(lams, dtype=complex).ravel()
    K = lams.size
    if K == 0:
        return np.zeros((0, 3, 3), complex), np.zeros(0)
    z, _ = points_many(lams)
    if scaled:
        if np.any(lams == 0):
            raise ZeroLambda("cube-root-frame propagation undefined at lambda = 0")
        izw = 1j * z[:, None] * _OMEGA_POW[None, :]  # (K,3)
        inv3iz = 1.0 / (3j * z)
        invz = 1.0 / z

        def rhs(t, M, idx):
            p, q = c.pq_values(t)
            a = (p * inv3iz[idx])[:, None, None]
            b = (q * inv3iz[idx] * invz[idx])[:, None, None]
            Qc = a * Q1_MAT + b * Q2_MAT
            return izw[idx][:, :, None] * M + Qc @ M

    else:

        def rhs(t, M, idx):
            return _rhs_plain(t, M, lams[idx], c)

    M = np.broadcast_to(np.eye(3, dtype=complex), (K, 3, 3)).copy()
    t = np.zeros(K)
    s = np.zeros(K)
    h = np.minimum(0.1, 0.5 / (1.0 + np.abs(z)))
    steps = np.zeros(K, dtype=np.int64)
    idx_all = np.arange(K)
    k1 = rhs(t, M, idx_all)
    active = idx_all.copy()
    tol = opts.tolerance
    thresh = opts.scaling_threshold

    while active.size:
        a = active
        ta = t[a]
        ha = h[a]
        Ma = M[a]
        kk1 = k1[a]
        hN = ha[:, None, None]

        k2 = rhs(ta + _DP_C[0] * ha, Ma + hN * (_DP_A[0][0] * kk1), a)
        k3 = rhs(
            ta + _DP_C[1] * ha, Ma + hN * (_DP_A[1][0] * kk1 + _DP_A[1][1] * k2), a
        )
        k4 = rhs(
            ta + _DP_C[2] * ha,
            Ma + hN * (_DP_A[2][0] * kk1 + _DP_A[2][1] * k2 + _DP_A[2][2] * k3),
            a,
        )
        k5 = rhs(
            ta + _DP_C[3] * ha,
            Ma
            + hN
            * (
                _DP_A[3][0] * kk1
                + _DP_A[3][1] * k2
                + _DP_A[3][2] * k3
                + _DP_A[3][3] * k4
            ),
            a,
        )
        k6 = rhs(
            ta + ha,
            Ma
            + hN
            * (
                _DP_A[4][0] * kk1
                + _DP_A[4][1] * k2
                + _DP_A[4][2] * k3
                + _DP_A[4][3] * k4
                + _DP_A[4][4] * k5
            ),
            a,
        )
        M5 = Ma + hN * (
            _DP_A[5][0] * kk1
            + _DP_A[5][2] * k3
            + _DP_A[5][3] * k4
            + _DP_A[5][4] * k5
            + _DP_A[5][5] * k6
        )
        k7 = rhs(ta + ha, M5, a)
        err = hN * (
            _DP_E[0] * kk1
            + _DP_E[2] * k3
            + _DP_E[3] * k4
            + _DP_E[4] * k5
            + _DP_E[5] * k6
            + _DP_E[6] * k7
        )
        mag5 = np.abs(M5).reshape(len(a), 9).max(1)
        en = np.abs(err).reshape(len(a), 9).max(1) / (tol * np.maximum(mag5, 1.0))

        acc = en <= 1.0
        if acc.any():
            ia = a[acc]
            t[ia] = ta[acc] + ha[acc]
            Macc = M5[acc]
            kacc = k7[acc]
            m = mag5[acc]
            big = m > thresh
            if big.any():
                Macc[big] /= m[big][:, None, None]
                kacc[big] /= m[big][:, None, None]
                s[ia[big]] += np.log(m[big])
            M[ia] = Macc
            k1[ia] = kacc

        fac = np.clip(0.9 * np.maximum(en, 1e-16) ** -0.2, 0.2, 5.0)
        h[a] = ha * fac
        steps[a] += 1

        done = t[a] >= 1.0 - 1e-14
        active = a[~done]
        if active.size:
            rem = 1.0 - t[active]
            h[active] = np.minimum(h[active], rem)
            over = steps[active] >= opts.max_steps
            tiny = h[active] < 1e-14
            if over.any() or tiny.any():
                bad = lams[active[over | tiny]]
                raise ToleranceNotMet(
                    f"step budget or minimum step exceeded at lambda = {bad[:4]}"
                )

    # final normalization to the scaling contract [1e-2, 1e+2]
    m = np.abs(M).reshape(K, 9).max(1)
    pos = m > 0
    M[pos] /= m[pos][:, None, None]
    s[pos] += np.log(m[pos])
    return M, s


# --------------------------------------------------------------------------
# results
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Monodromy:
    """One-period fundamental matrix with a separated log-scale.

    The true matrix is exp(log_scale) * matrix; max|matrix| is normalized to
    lie within the scaling contract.  trace recombines the scale (may
    overflow for extreme |lambda|; use trace_scaled to work relative to a
    reference exponent).
    """

    matrix: np.ndarray
    log_scale: float
    point: SpectralPoint

    @property
    def lam(self) -> complex:
        return self.point.lam

    @property
    def trace(self) -> complex:
        return np.exp(self.log_scale) * np.trace(self.matrix)

    def trace_scaled(self, ref: float) -> complex:
        """exp(log_scale - ref) * tr(matrix); stable near a known exponent ref."""
        return np.exp(self.log_scale - ref) * np.trace(self.matrix)

    @property
    def trace_inverse(self) -> complex:
        """Trace of the inverse monodromy (= second symmetric multiplier sum).

        Computed from the adjugate; only meaningful while exp(2 log_scale)
        times machine epsilon stays below the target magnitude (the entries
        cancel below that), so prefer a propagation at the conjugated
        parameter at high energy.  Kept as an independent identity check.
        """
        return np.exp(2.0 * self.log_scale) * _adj_trace(self.matrix)

    def trace_inverse_scaled(self, ref: float) -> complex:
        return np.exp(2.0 * self.log_scale - ref) * _adj_trace(self.matrix)

    def det_value(self) -> complex:
        """det of the full monodromy, recombined stably in the log domain."""
        d = np.linalg.det(self.matrix)
        if d == 0:
            return 0j
        return np.exp(3.0 * self.log_scale + np.log(complex(d)))


def _adj_trace(G: np.ndarray) -> complex:
    """Sum of principal 2x2 minors (trace of the adjugate)."""
    return (
        G[..., 1, 1] * G[..., 2, 2]
        - G[..., 1, 2] * G[..., 2, 1]
        + G[..., 0, 0] * G[..., 2, 2]
        - G[..., 0, 2] * G[..., 2, 0]
        + G[..., 0, 0] * G[..., 1, 1]
        - G[..., 0, 1] * G[..., 1, 0]
    )


def propagate(
    c: Coefficients, sp: SpectralPoint, opts: IntegratorOptions | None = None
) -> Monodromy:
    """Monodromy at one spectral point (direct system; valid at lambda = 0)."""
    opts = opts or IntegratorOptions()
    G, s = _propagate_batch(c, np.array([sp.lam]), opts, scaled=False)
    return Monodromy(G[0], float(s[0]), sp)


def propagate_many(
    c: Coefficients, lams: Sequence[complex], opts: IntegratorOptions | None = None
) -> list[Monodromy]:
    """Batch version of propagate; one vectorized sweep over the whole grid."""
    opts = opts or IntegratorOptions()
    lams = np.asarray(lams, dtype=complex)
    G, s = _propagate_batch(c, lams, opts, scaled=False)
    return [Monodromy(G[k], float(s[k]), point(lams[k])) for k in range(lams.size)]


def propagate_scaled(
    c: Coefficients, sp: SpectralPoint, opts: IntegratorOptions | None = None
) -> Monodromy:
    """Monodromy via the cube-root-frame system, mapped back to the plain frame.

    Requires lambda != 0 (the frame transform divides by the cube root).
    Agrees with propagate to the integrator tolerance; useful as an
    independent propagation route at moderate-to-high energies.
    """
    opts = opts or IntegratorOptions()
    if sp.lam == 0:
        raise ZeroLambda("cube-root-frame propagation undefined at lambda = 0")
    G, s = _propagate_batch(c, np.array([sp.lam]), opts, scaled=True)
    Uu, Uu_inv = frame_matrices(sp.z)
    back = Uu @ G[0] @ Uu_inv
    m = float(np.abs(back).max())
    return Monodromy(back / m, float(s[0] + np.log(m)), sp)


def frame_matrices(z: complex) -> tuple[np.ndarray, np.ndarray]:
    """Similarity pair (ZU, (ZU)^-1) between the plain and cube-root frames."""
    Zm = np.diag([1.0, 1j * z, (1j * z) ** 2]).astype(complex)
    Uu = Zm @ U_MAT
    Uu_inv = U_MAT.conj().T @ np.diag([1.0, 1.0 / (1j * z), 1.0 / (1j * z) ** 2])
    return Uu, Uu_inv


def to_scaled_frame(mon: Monodromy) -> np.ndarray:
    """Full cube-root-frame matrix exp(s) * U^-1 G U (plain complex values)."""
    Uu, Uu_inv = frame_matrices(mon.point.z)
    return np.exp(mon.log_scale) * (Uu_inv @ mon.matrix @ Uu)


def trace_pair_logscaled_many(
    c: Coefficients, lams: Sequence[complex], opts: IntegratorOptions | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(tr_a, s_a, tr_b, s_b) with T = e^{s_a} tr_a and T_dual = conj(e^{s_b} tr_b).

    The dual trace (second symmetric multiplier function) equals the
    conjugated trace at the conjugated spectral parameter, so it is obtained
    from its own propagation; recovering it from the adjugate of the matrix
    at lambda would cancel catastrophically once entries reach e^{z0}.  Real
    parameters reuse the single propagation.  Log-scaled outputs never
    overflow.
    """
    opts = opts or IntegratorOptions()
    lams = np.asarray(lams, dtype=complex)
    real = lams.imag == 0.0
    cplx_idx = np.nonzero(~real)[0]
    batch = np.concatenate([lams, np.conj(lams[cplx_idx])])
    G, s = _propagate_batch(c, batch, opts, scaled=False)
    n = lams.size
    tr = np.trace(G, axis1=1, axis2=2)
    tr_a = tr[:n]
    s_a = s[:n]
    tr_b = tr_a.copy()
    s_b = s_a.copy()
    if cplx_idx.size:
        tr_b[cplx_idx] = tr[n:]
        s_b[cplx_idx] = s[n:]
    return tr_a, s_a, tr_b, s_b


def trace_pair_many(
    c: Coefficients, lams: Sequence[complex], opts: IntegratorOptions | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """(T, T_dual) on a grid; one batched sweep covering both propagations.

    T is the monodromy trace; T_dual the conjugated trace at the conjugated
    parameter, which is exactly the pair the multiplier cubic needs.
    """
    tr_a, s_a, tr_b, s_b = trace_pair_logscaled_many(c, lams, opts)
    return np.exp(s_a) * tr_a, np.conj(np.exp(s_b) * tr_b)


# --------------------------------------------------------------------------
# iterated-integral series in the cube-root frame (high-energy cross-check)
# --------------------------------------------------------------------------

def _gl_composite(n_min: int, oscillation: float) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights on [0,1].

    Panel count grows with the oscillation budget (radians across the
    interval) so highly oscillatory kernels stay resolved.
    """
    panels = max(n_min // 8, int(np.ceil(oscillation / 8.0)), 1)
    x8, w8 = np.polynomial.legendre.leggauss(8)
    edges = np.linspace(0.0, 1.0, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    x = (mid[:, None] + half[:, None] * x8[None, :]).ravel()
    w = (half[:, None] * w8[None, :]).ravel()
    return x, w


def picard_terms(
    c: Coefficients, sp: SpectralPoint, N: int, nodes: int = 64
) -> list[np.ndarray]:
    """First N iterated-integral terms of the cube-root-frame monodromy.

    Term 0 is the diagonal exp(i z Omega); term n couples through the frame
    coefficient matrix once more per level, evaluated by nested composite
    Gauss-Legendre.  Supported depth N <= 3.
    """
    if sp.lam == 0:
        raise ZeroLambda("iterated-integral terms undefined at lambda = 0")
    if N < 1:
        raise UnsupportedOrder("N must be >= 1")
    if N > 3:
        raise UnsupportedOrder("N <= 3 supported")
    z = sp.z
    izw = 1j * z * _OMEGA_POW  # (3,)
    inv3iz = 1.0 / (3j * z)
    x, w = _gl_composite(nodes, np.sqrt(3.0) * abs(z))

    def Qc_at(t: np.ndarray) -> np.ndarray:
        p, q = c.pq_values(t)
        a = (p * inv3iz)[..., None, None]
        b = (q * inv3iz / z)[..., None, None]
        return a * Q1_MAT + b * Q2_MAT

    def term(n: int, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if n == 0:
            return np.exp(ts[..., None] * izw)[..., :, None] * np.eye(3, dtype=complex)
        if ts.size > 2048:  # keep nested tensors bounded
            flat = ts.ravel()
            parts = [term(n, chunk) for chunk in np.array_split(flat, max(1, flat.size // 2048))]
            return np.concatenate(parts, axis=0).reshape(*ts.shape, 3, 3)
        s = ts[..., None] * x  # (..., m)
        inner = term(n - 1, s)  # (..., m, 3, 3)
        integ = np.exp((ts[..., None] - s)[..., None] * izw)[..., :, None] * (
            Qc_at(s) @ inner
        )
        return ts[..., None, None] * np.einsum("m,...mij->...ij", w, integ)

    return [term(n, np.array(1.0))[()] for n in range(N)]


def picard_tail_bound(c: Coefficients, sp: SpectralPoint, N: int, kap: float) -> float:
    """Envelope exp(z0 + kappa)/|z|^N for the order-N remainder (|lambda| >= 1)."""
    return float(np.exp(sp.z0 + kap) / abs(sp.z) ** N)


# --------------------------------------------------------------------------
# high-energy trace asymptotic (closed form for finite Fourier coefficients)
# --------------------------------------------------------------------------

def _expm1_ratio(cv: np.ndarray) -> np.ndarray:
    """(exp(c) - 1)/c, with the removable singularity filled in."""
    cv = np.asarray(cv, dtype=complex)
    small = np.abs(cv) < 1e-8
    safe = np.where(small, 1.0, cv)
    out = (np.exp(safe) - 1.0) / safe
    return np.where(small, 1.0 + cv / 2.0 + cv * cv / 6.0, out)


def trace_asymptotic(c: Coefficients, sp: SpectralPoint) -> complex:
    """Two-term high-energy trace approximation.

    Leading part: the three frame exponentials with the mean-of-p phase
    correction folded into each exponent.  The second part divides by z^2
    and integrates the autocorrelation of p against the pair-interaction
    kernel; for a finite Fourier model that integral is a finite sum of
    exponential ratios, so no quadrature is involved.  The remainder is one
    more power of 1/z down.
    """
    if sp.lam == 0:
        raise ZeroLambda("asymptotic form undefined at lambda = 0")
    z = sp.z
    p0 = float(np.real(c.p_hat.get(0, 0.0)))
    phi0 = sum(
        np.exp(1j * z * _OMEGA_POW[k] + 2j * p0 / (3.0 * _OMEGA_POW[k] * z))
        for k in range(3)
    )
    # |p_n|^2 over all integer modes (mirrors included)
    mode_idx = [0] + [n for k in range(c.degree) for n in (k + 1, -(k + 1))]
    mode_amp = [abs(c.p_hat.get(0, 0.0)) ** 2] + [
        abs(c.p_hat.get(n, 0.0)) ** 2 for n in mode_idx[1:]
    ]
    phi1 = 0j
    for k in range(3):
        for j in range(k + 1, 3):
            pref = _OMEGA_POW[(2 * (k + j)) % 3] * np.exp(1j * _OMEGA_POW[j] * z)
            cc = 1j * (_OMEGA_POW[k] - _OMEGA_POW[j]) * z
            acc = 0j
            for n, a2 in zip(mode_idx, mode_amp):
                if a2 != 0:
                    acc += a2 * _expm1_ratio(np.array(cc + 2j * np.pi * n))[()]
            phi1 += pref * acc
    phi1 *= -1.0 / 9.0
    return complex(phi0 + phi1 / z**2)
