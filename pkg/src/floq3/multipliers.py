"""Multipliers (monodromy eigenvalues), branch labels, and the discriminant.

The characteristic cubic is built from two trace evaluations: the trace
itself and the dual trace (trace of the inverse monodromy, equal for real
coefficients to the conjugated trace at the conjugated spectral point).
Roots are labeled against the unperturbed exponential targets; the
discriminant is available through three algebraically identical routes
whose mutual agreement is a standing cross-check.  Everything is a pure
function of its arguments and safe for concurrent grid evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .errors import NonRealLambda
from .monodromy import OMEGA, SpectralPoint

_OMEGA_POW = np.array([1.0, OMEGA, OMEGA * OMEGA])


# --------------------------------------------------------------------------
# characteristic cubic and root solving
# --------------------------------------------------------------------------

def characteristic_cubic(T_val: complex, T_conj_val: complex) -> tuple[complex, ...]:
    """Coefficients (descending powers) of -tau^3 + T tau^2 - Tdual tau + 1.

    T_conj_val must be the dual trace at the same point, i.e. the conjugated
    trace at the conjugated spectral parameter; the caller supplies both.
    """
    return (-1.0 + 0j, complex(T_val), -complex(T_conj_val), 1.0 + 0j)


def _quadratic_roots(sig: complex, prod: complex) -> tuple[complex, complex]:
    """Roots of x^2 - sig x + prod, cancellation-safe."""
    d = np.sqrt(sig * sig - 4.0 * prod)
    if (np.conj(sig) * d).real < 0:
        d = -d
    r1 = 0.5 * (sig + d)
    if r1 == 0:
        return 0j, complex(sig)
    return complex(r1), complex(prod / r1)

def _solve_cubic(T: complex, Tc: complex) -> np.ndarray:
    """Multiplier triple from the trace pair, stable across magnitude regimes.

    Companion-matrix eigenvalues give every root with small backward error
    relative to the dominant magnitude, which leaves the far-small end of an
    exponentially spread triple inaccurate; those roots are recovered
    algebraically through the symmetric functions (product is exactly one,
    pair sum is the dual trace), which costs nothing in accuracy for the
    dominant roots and restores full relative accuracy for the tiny ones.
    """
    T = complex(T)
    Tc = complex(Tc)
    roots = np.roots(np.array([-1.0, T, -Tc, 1.0], dtype=complex))
    order = np.argsort(-np.abs(roots))
    ta, tb, tc = roots[order]
    if abs(ta) > 1e4 * abs(tc):
        # companion loses the small end of a wide-spread triple; rebuild the
        # deflated pair exactly from the symmetric functions of the cubic
        # (their sum is (Tc - 1/ta)/ta, their product 1/ta)
        sig = (Tc - 1.0 / ta) / ta
        tb, tc = _quadratic_roots(sig, 1.0 / ta)
    return np.array([ta, tb, tc])


# --------------------------------------------------------------------------
# labeled triples
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiplierTriple:
    """Multipliers ordered by their matched unperturbed targets.

    tau[j] is the root assigned to exp(i z w^j); labels holds the matched
    target and the (scale-free) matching distance per slot.  The flag marks
    assignments whose optimum is not clearly separated; inside localization
    disks labels are intentionally not trusted.
    """

    tau: np.ndarray
    labels: tuple[tuple[complex, float], ...]
    ambiguous: bool
    point: SpectralPoint
    lyapunov: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.lyapunov is None:
            object.__setattr__(
                self, "lyapunov", 0.5 * (self.tau + 1.0 / self.tau)
            )


def _rel_dist(a: complex, b: complex) -> float:
    return abs(a - b) / (abs(a) + abs(b) + 1e-300)


def solve_multipliers(
    T_val: complex, T_conj_val: complex, sp: SpectralPoint
) -> MultiplierTriple:
    """Solve the characteristic cubic and label roots against the targets.

    The optimal assignment minimizes the summed scale-free distances to
    exp(i z w^j); if another assignment comes within a factor 2 of the
    optimum the triple is flagged ambiguous (root invariants still hold).
    """
    roots = _solve_cubic(T_val, T_conj_val)
    targets = np.exp(1j * sp.z * _OMEGA_POW)
    best_cost = np.inf
    second = np.inf
    best_perm = (0, 1, 2)
    for perm in permutations(range(3)):
        cost = sum(_rel_dist(roots[perm[j]], targets[j]) for j in range(3))
        if cost < best_cost:
            second = best_cost
            best_cost = cost
            best_perm = perm
        elif cost < second:
            second = cost
    tau = roots[list(best_perm)]
    labels = tuple(
        (complex(targets[j]), _rel_dist(tau[j], targets[j])) for j in range(3)
    )
    ambiguous = not (second > 2.0 * best_cost)
    return MultiplierTriple(tau=tau, labels=labels, ambiguous=ambiguous, point=sp)


# --------------------------------------------------------------------------
# discriminant routes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscriminantValue:
    """Discriminant with its provenance route and optional cross-route residual."""

    rho: complex
    route: str
    cross_residual: float = float("nan")


def discriminant(triple: MultiplierTriple) -> DiscriminantValue:
    """Squared product of pairwise multiplier differences."""
    t1, t2, t3 = triple.tau
    rho = ((t1 - t2) * (t1 - t3) * (t2 - t3)) ** 2
    return DiscriminantValue(rho=complex(rho), route="product")


def discriminant_trace_pair(T_val: complex, T_conj_val: complex) -> complex:
    """Entire-function discriminant of the characteristic cubic.

    Valid at every complex spectral point; reduces to the real-axis trace
    identity when the dual trace is the plain conjugate.
    """
    a = complex(T_val)
    b = complex(T_conj_val)
    ab = a * b
    return ab * ab - 4.0 * (a**3 + b**3) + 18.0 * ab - 27.0


def discriminant_scaled(
    T_s: complex, ea: float, Tc_s: complex, eb: float
) -> tuple[complex, float]:
    """Discriminant with separated exponents: inputs T = e^ea T_s, Tdual = e^eb Tc_s.

    Returns (rho_scaled, m) with rho = e^m rho_scaled; every internal term is
    damped by the common exponent m, so the value never overflows no matter
    how fast the traces grow.  Intended for winding-number work where only
    the argument (and relative magnitude) of rho matters.
    """
    m = max(2.0 * (ea + eb), 3.0 * ea, 3.0 * eb, 0.0)
    ab = T_s * Tc_s
    rho_s = (
        np.exp(2.0 * (ea + eb) - m) * ab * ab
        - 4.0 * (np.exp(3.0 * ea - m) * T_s**3 + np.exp(3.0 * eb - m) * Tc_s**3)
        + 18.0 * np.exp(ea + eb - m) * ab
        - 27.0 * np.exp(-m)
    )
    return complex(rho_s), float(m)


def _require_real(lambda_real) -> float:
    lam = complex(lambda_real)
    if lam.imag != 0.0:
        raise NonRealLambda(f"identity valid on the real axis only, got {lam}")
    return lam.real


def discriminant_from_trace(T_val: complex, lambda_real: float) -> DiscriminantValue:
    """Real-axis discriminant from the trace alone.

    |T|^4 - 8 Re T^3 + 18 |T|^2 - 27; real by construction.
    """
    _require_real(lambda_real)
    T = complex(T_val)
    rho = (
        abs(T) ** 4 - 8.0 * (T**3).real + 18.0 * abs(T) ** 2 - 27.0
    )
    return DiscriminantValue(rho=complex(rho), route="trace_identity")


def discriminant_ab(T_val: complex, lambda_real: float) -> DiscriminantValue:
    """Real-axis discriminant in shifted coordinates a = Re T - 3, b = Im T.

    Algebraically identical to the trace identity but free of the large
    cancellations near T = 3, which makes it the accurate form for the
    small-coupling regime.
    """
    _require_real(lambda_real)
    T = complex(T_val)
    a = T.real - 3.0
    b = T.imag
    rho = a**3 * (a + 4.0) + b * b * (108.0 + 2.0 * (a + 18.0) * a + b * b)
    return DiscriminantValue(rho=complex(rho), route="ab_form")


def discriminant_cross(
    T_val: complex, triple: MultiplierTriple, lambda_real: float
) -> DiscriminantValue:
    """Product-route discriminant carrying the max pairwise route disagreement."""
    vals = [
        discriminant(triple).rho,
        discriminant_from_trace(T_val, lambda_real).rho,
        discriminant_ab(T_val, lambda_real).rho,
    ]
    scale = max(1.0, *(abs(v) for v in vals))
    res = max(
        abs(vals[i] - vals[j]) / scale for i in range(3) for j in range(i + 1, 3)
    )
    return DiscriminantValue(rho=vals[0], route="product", cross_residual=float(res))


# --------------------------------------------------------------------------
# ramification residual
# --------------------------------------------------------------------------

def psi(sp: SpectralPoint, tau3: complex, tau3_conj: complex) -> complex:
    """Residual whose vanishing marks a ramification in the upper half plane.

    tau3 is the dominant-branch multiplier at the point; tau3_conj the
    dominant-branch value at the conjugated point.  Only meaningful where
    branch labels are reliable (outside the localization disks, |lambda|
    large).
    """
    return complex(tau3) - np.conj(complex(tau3_conj)) ** 2
