"""Finite Fourier model of the 1-periodic real coefficients (p, q).

The pair enters the operator through its Fourier modes only, so the model
stores the modes exactly and every derived quantity (pointwise values, the
autocorrelation of p, the small-coupling invariant) is evaluated in closed
form.  The mean of q is forced to zero; reality is enforced through the
mirror symmetry c_{-n} = conj(c_n).
"""

from __future__ import annotations

import json
import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import NonRealCoefficient, NonzeroPMean, NonzeroQMean

_TWO_PI = 2.0 * np.pi


def _normalize_entries(entries: Iterable[tuple[int, complex]], name: str) -> dict[int, complex]:
    """Merge user entries into a full mirrored mode dict keyed by n in Z."""
    given: dict[int, complex] = {}
    for n, c in entries:
        n = int(n)
        c = complex(c)
        if not (np.isfinite(c.real) and np.isfinite(c.imag)):
            raise NonRealCoefficient(f"{name}: non-finite coefficient at mode {n}")
        if n in given and given[n] != c:
            raise NonRealCoefficient(f"{name}: conflicting duplicate entries at mode {n}")
        given[n] = c
    full: dict[int, complex] = {}
    for n, c in given.items():
        m = -n
        if m in given:
            if abs(given[m] - np.conj(c)) > 1e-12 * max(1.0, abs(c)):
                raise NonRealCoefficient(
                    f"{name}: modes {n} and {m} are not conjugate mirrors"
                )
        if n == 0 and abs(c.imag) > 0.0:
            raise NonRealCoefficient(f"{name}: mode 0 must be real")
        full[n] = c
        full.setdefault(m, complex(np.conj(c)))
    return {n: c for n, c in full.items() if c != 0}


@dataclass(frozen=True)
class Coefficients:
    """Real 1-periodic (p, q) stored as finite Fourier series.

    Immutable after construction; safe to share across concurrent workers.
    """

    p_hat: Mapping[int, complex]
    q_hat: Mapping[int, complex]
    degree: int
    # positive-mode arrays for fast evaluation (index k holds mode k+1)
    _p_pos: np.ndarray = field(repr=False, compare=False, default=None)
    _q_pos: np.ndarray = field(repr=False, compare=False, default=None)

    @classmethod
    def from_fourier(
        cls,
        p_entries: Sequence[tuple[int, complex]] = (),
        q_entries: Sequence[tuple[int, complex]] = (),
    ) -> "Coefficients":
        """Build from (mode, coefficient) pairs; n < 0 mirrors are inferred.

        Raises NonzeroQMean if the q mean is nonzero and NonRealCoefficient
        if supplied mirrors conflict.
        """
        p = _normalize_entries(p_entries, "p")
        q = _normalize_entries(q_entries, "q")
        if q.get(0, 0) != 0:
            raise NonzeroQMean(f"q mean must vanish, got {q[0]}")
        q.pop(0, None)
        degree = max([abs(n) for n in (*p, *q)] or [0])
        d = degree
        p_pos = np.zeros(d, dtype=complex)
        q_pos = np.zeros(d, dtype=complex)
        for n, c in p.items():
            if n >= 1:
                p_pos[n - 1] = c
        for n, c in q.items():
            if n >= 1:
                q_pos[n - 1] = c
        obj = cls(p_hat=dict(p), q_hat=dict(q), degree=degree)
        object.__setattr__(obj, "_p_pos", p_pos)
        object.__setattr__(obj, "_q_pos", q_pos)
        return obj

    # -- pointwise evaluation -------------------------------------------------

    def pq_values(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized (p(t), q(t)); real by construction of the mirrored sum."""
        t = np.asarray(t, dtype=float)
        p = np.full(t.shape, float(np.real(self.p_hat.get(0, 0.0))))
        q = np.zeros(t.shape)
        if self.degree:
            w = np.exp(1j * _TWO_PI * t)
            wk = np.ones_like(w)
            for k in range(self.degree):
                wk = wk * w
                pk = self._p_pos[k]
                qk = self._q_pos[k]
                if pk != 0:
                    p = p + 2.0 * (pk * wk).real
                if qk != 0:
                    q = q + 2.0 * (qk * wk).real
        return p, q

    def value(self, which: str, t) -> float | np.ndarray:
        """Evaluate p or q at t (reduced mod 1 by periodicity of the modes)."""
        if which not in ("p", "q"):
            raise ValueError(f"which must be 'p' or 'q', got {which!r}")
        p, q = self.pq_values(np.asarray(t, dtype=float))
        out = p if which == "p" else q
        return float(out) if out.ndim == 0 else out

    # -- derived quantities ---------------------------------------------------

    def autocorrelation_eta(self, u) -> float | np.ndarray:
        """Autocorrelation of p over one period, eta(u) = sum |p_n|^2 e^{i2pi nu}.

        Real and symmetric about u = 1/2.
        """
        u = np.asarray(u, dtype=float)
        out = np.full(u.shape, abs(self.p_hat.get(0, 0.0)) ** 2)
        for k in range(self.degree):
            a2 = abs(self._p_pos[k]) ** 2
            if a2 != 0:
                out = out + 2.0 * a2 * np.cos(_TWO_PI * (k + 1) * u)
        return float(out) if out.ndim == 0 else out

    def invariant_h(self) -> float:
        """Small-coupling band invariant.

        h = (2/3) * sum_{n>=1} ( |p_n|^2/(2 pi n)^2 - 3 |q_n|^2/(2 pi n)^4 ).
        Requires a mean-zero p.
        """
        if self.p_hat.get(0, 0) != 0:
            raise NonzeroPMean(f"p mean must vanish, got {self.p_hat[0]}")
        h = 0.0
        for k in range(self.degree):
            n = k + 1
            h += abs(self._p_pos[k]) ** 2 / (_TWO_PI * n) ** 2
            h -= 3.0 * abs(self._q_pos[k]) ** 2 / (_TWO_PI * n) ** 4
        return (2.0 / 3.0) * h

    def scaled(self, factor: float) -> "Coefficients":
        """Coefficients of (factor*p, factor*q)."""
        return Coefficients.from_fourier(
            [(n, factor * c) for n, c in self.p_hat.items() if n >= 0],
            [(n, factor * c) for n, c in self.q_hat.items() if n >= 0],
        )

    def is_zero(self) -> bool:
        return not self.p_hat and not self.q_hat

    # -- serialization --------------------------------------------------------

    def to_json_obj(self) -> dict:
        """Canonical JSON form: only n >= 0 modes, [n, re, im] triples."""
        return {
            "p": [[n, c.real, c.imag] for n, c in sorted(self.p_hat.items()) if n >= 0],
            "q": [[n, c.real, c.imag] for n, c in sorted(self.q_hat.items()) if n >= 0],
        }

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "Coefficients":
        p = [(int(n), complex(re, im)) for n, re, im in obj.get("p", [])]
        q = [(int(n), complex(re, im)) for n, re, im in obj.get("q", [])]
        return cls.from_fourier(p, q)

    def content_hash(self) -> str:
        blob = json.dumps(self.to_json_obj(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Kappa:
    """L1 norm budget kappa = ||p||_L1 + ||q||_L1 (diagnostic bounds only)."""

    value: float


def _unit_circle_zeros(pos_modes: np.ndarray, mean: float) -> list[float]:
    """Zeros in [0,1) of a real trig polynomial given by mean + positive modes."""
    d = len(pos_modes)
    if d == 0:
        return []
    # laurent polynomial sum_{n=-d}^{d} c_n w^n; roots of w^d * that
    coeffs = np.zeros(2 * d + 1, dtype=complex)
    coeffs[d] = mean
    for k in range(d):
        coeffs[d + k + 1] = pos_modes[k]
        coeffs[d - k - 1] = np.conj(pos_modes[k])
    # strip leading zeros for np.roots (highest degree first)
    c = coeffs[::-1]
    nz = np.nonzero(np.abs(c) > 0)[0]
    if len(nz) == 0:
        return []
    c = c[nz[0]:]
    if len(c) <= 1:
        return []
    roots = np.roots(c)
    ts = []
    for r in roots:
        if abs(abs(r) - 1.0) < 1e-8:
            ts.append(float(np.angle(r) / _TWO_PI % 1.0))
    ts = sorted(set(np.round(ts, 14)))
    return ts


def _abs_integral(c: Coefficients, which: str, order: int) -> float:
    """Integral of |p| or |q| over one period.

    Composite Gauss-Legendre split at the sign changes so each panel is
    smooth; the kinks of |f| otherwise cap the achievable accuracy.
    """
    pos = c._p_pos if which == "p" else c._q_pos
    mean = float(np.real((c.p_hat if which == "p" else c.q_hat).get(0, 0.0)))
    if len(pos) == 0 or not np.any(pos):
        return abs(mean)
    breaks = _unit_circle_zeros(pos, mean)
    edges = [0.0] + [t for t in breaks if 0.0 < t < 1.0] + [1.0]
    total = 0.0
    nseg = len(edges) - 1
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a < 1e-14:
            continue
        m = max(8, int(np.ceil(order * (b - a) / nseg)) + 8)
        x, wq = np.polynomial.legendre.leggauss(m)
        t = 0.5 * (b - a) * x + 0.5 * (b + a)
        f = c.value(which, t)
        total += 0.5 * (b - a) * float(np.abs(f) @ wq)
    return total


def kappa(c: Coefficients, order: int = 512) -> Kappa:
    """Quadrature value of ||p||_L1 + ||q||_L1 at the requested node budget."""
    return Kappa(_abs_integral(c, "p", order) + _abs_integral(c, "q", order))


def from_fourier(p_entries=(), q_entries=()) -> Coefficients:
    """Module-level alias for Coefficients.from_fourier."""
    return Coefficients.from_fourier(p_entries, q_entries)


def eval_coefficient(c: Coefficients, which: str, t) -> float | np.ndarray:
    """Module-level alias for Coefficients.value."""
    return c.value(which, t)


def autocorrelation_eta(c: Coefficients, u) -> float | np.ndarray:
    return c.autocorrelation_eta(u)


def invariant_h(c: Coefficients) -> float:
    return c.invariant_h()
