"""Location of the multiplicity-3 spectrum and the discriminant zeros.

The real-axis scan works on the trace-identity form of the discriminant:
sign changes are pinned down by vectorized bisection, tangential zeros by
local minimization.  Off the axis, each index-n localization disk is swept
by an argument-principle winding count (phase unwinding of the discriminant
along the mapped circle) and the two zeros inside are polished by damped
complex Newton started from the first-order perturbed positions.

Disk searches for distinct indices are independent (and are batched into
shared propagation sweeps here); the band-report assembly is a
single-threaded reduction over the refined crossings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .coeffs import Coefficients
from .errors import CountMismatch, InsufficientData, WindowTooCoarse
from .monodromy import (
    IntegratorOptions,
    points_many,
    trace_pair_logscaled_many,
    trace_pair_many,
)
from .multipliers import discriminant_scaled, discriminant_trace_pair

DISK_RADIUS = np.pi / (2.0 * np.sqrt(3.0))


def disk_center_z(n: int) -> complex:
    """z-plane center of the index-n localization disk (n != 0 mirrored by sign)."""
    return np.exp(1j * np.sign(n) * np.pi / 6.0) * 2.0 * np.pi * abs(n) / np.sqrt(3.0)


def unperturbed_ramification(n: int) -> complex:
    """Double zero of the zero-coefficient discriminant at index n >= 1."""
    return 1j * (2.0 * np.pi * n / np.sqrt(3.0)) ** 3


def in_disk(lam: complex, n: int) -> bool:
    """Membership in the index-n localization disk (mirror family for n < 0).

    Lower-half points are tested through their conjugate against the upper
    disk, which matches the mirror definition of the disk family and avoids
    the branch seam of the principal cube root.
    """
    lam = complex(lam)
    probe = lam if lam.imag >= 0 else np.conj(lam)
    z, _ = points_many(np.array([probe]))
    center = disk_center_z(abs(n)) if n != 0 else 0.0
    return bool(abs(z[0] - center) < DISK_RADIUS)


# --------------------------------------------------------------------------
# records
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RamificationRecord:
    """A located discriminant zero with its index labels and diagnostics."""

    n: int
    sign: str  # '+' or '-'
    value: complex
    residual: float
    disk_ok: bool
    newton_ok: bool = True


@dataclass(frozen=True)
class BandReport:
    """Multiplicity-3 intervals inside a scanned real window.

    Zero-width intervals record tangential (double) zeros.  count_m counts
    real discriminant zeros with multiplicity inside the window;
    window_clean is False when the discriminant is negative at a window
    edge (a band is clipped).  parity_flag marks an odd simple-zero count,
    where the index convention is extrapolated from the even pattern.
    """

    intervals: tuple[tuple[float, float], ...]
    endpoint_records: tuple[RamificationRecord, ...]
    count_m: int
    window: tuple[float, float]
    window_clean: bool
    parity_flag: bool = False


@dataclass(frozen=True)
class ScanOptions:
    """Controls for the real-axis scan."""

    max_jump: float = 1e6
    refine_rel: float = 1e-9
    degenerate_tol: float = 1e-10


# --------------------------------------------------------------------------
# real-axis scan
# --------------------------------------------------------------------------

def _rho_real_many(c, lams, iopts) -> np.ndarray:
    """Real-axis discriminant on a grid, in the shifted (a, b) arrangement.

    Algebraically this is the trace identity; the shifted form survives the
    small-coupling regime where |T - 3| is tiny and the quartic arrangement
    would cancel catastrophically.
    """
    T, _ = trace_pair_many(c, np.asarray(lams, dtype=complex), iopts)
    a = T.real - 3.0
    b = T.imag
    return a**3 * (a + 4.0) + b * b * (108.0 + 2.0 * (a + 18.0) * a + b * b)


def _bisect_many(c, lo, hi, flo, iopts, xtols) -> np.ndarray:
    """Vectorized bisection for sign-changing brackets of the real discriminant."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    slo = np.sign(flo)
    for _ in range(200):
        width = hi - lo
        if np.all(width <= xtols):
            break
        mid = 0.5 * (lo + hi)
        fm = _rho_real_many(c, mid, iopts)
        left = np.sign(fm) == slo
        lo = np.where(left, mid, lo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def _even_pattern_labels(count: int) -> list[tuple[int, str]]:
    """Index/sign labels for sorted real zeros, outermost pair labeled (0,-),(0,+)."""
    k = count // 2
    left = [(0, "-")] + [(-j, "+") for j in range(1, k)]
    right = [(j, "-") for j in range(k - 1, 0, -1)] + [(0, "+")]
    labels = left + right
    if count % 2 == 1:
        labels = left + [(k, "-")] + right
    return labels


def scan_s3(
    c: Coefficients,
    window: tuple[float, float],
    grid: int = 512,
    opts: ScanOptions | None = None,
    iopts: IntegratorOptions | None = None,
) -> BandReport:
    """Scan a real window for the region where the discriminant is <= 0.

    Sign changes are refined by bisection to width refine_rel * max(1,|l|);
    positive local minima that dip to (numerical) zero are reported as
    degenerate zero-width intervals.  Raises WindowTooCoarse when adjacent
    same-sign grid values jump by more than the configured factor without a
    crossing, which signals unresolved structure.
    """
    opts = opts or ScanOptions()
    iopts = iopts or IntegratorOptions()
    left, right = float(window[0]), float(window[1])
    if not left < right:
        raise ValueError("window must satisfy left < right")
    if grid < 16:
        raise ValueError("grid must be >= 16")
    xs = np.linspace(left, right, grid + 1)
    rho = _rho_real_many(c, xs, iopts)

    sgn = np.sign(rho)
    crossing_pairs = []
    for i in range(grid):
        if sgn[i] != 0 and sgn[i + 1] != 0 and sgn[i] != sgn[i + 1]:
            crossing_pairs.append(i)
        elif sgn[i] != 0 and sgn[i] == sgn[i + 1]:
            lo_m, hi_m = sorted((abs(rho[i]), abs(rho[i + 1])))
            if lo_m > 0 and hi_m / lo_m > opts.max_jump:
                raise WindowTooCoarse(
                    f"discriminant jumps by {hi_m / lo_m:.2e} across "
                    f"[{xs[i]:.6g}, {xs[i+1]:.6g}]; refine the grid"
                )

    zeros: list[float] = []  # simple crossings
    degenerate: list[float] = []

    # exact-zero nodes count as tangential or crossing points; refine around them
    node_zero = np.nonzero(sgn == 0)[0]

    # tangential zeros: positive local minima dipping to ~0, or hidden crossings
    def rho_scalar(x):
        return float(_rho_real_many(c, np.array([x]), iopts)[0])

    extra_brackets = []
    for i in range(1, grid):
        if sgn[i] > 0 and rho[i] <= rho[i - 1] and rho[i] <= rho[i + 1]:
            lo, hi = xs[i - 1], xs[i + 1]
            scale = max(abs(rho[i - 1]), abs(rho[i + 1]))
            if scale == 0 or rho[i] > 1e-2 * scale:
                # not a pronounced dip relative to its neighbors
                continue
            res = minimize_scalar(
                rho_scalar, bounds=(lo, hi), method="bounded",
                options={"xatol": max(1e-13, opts.refine_rel * max(1.0, abs(xs[i])) * 1e-2)},
            )
            fmin, xmin = float(res.fun), float(res.x)
            if fmin < -opts.degenerate_tol * scale:
                extra_brackets.append((lo, xmin))
                extra_brackets.append((xmin, hi))
            elif abs(fmin) <= opts.degenerate_tol * scale:
                degenerate.append(xmin)

    for i in node_zero:
        # a node exactly on a zero: classify by neighbors
        lo = xs[max(i - 1, 0)]
        hi = xs[min(i + 1, grid)]
        sl = sgn[max(i - 1, 0)]
        sr = sgn[min(i + 1, grid)]
        if sl * sr < 0:
            zeros.append(float(xs[i]))
        else:
            degenerate.append(float(xs[i]))

    if crossing_pairs or extra_brackets:
        los = [xs[i] for i in crossing_pairs] + [b[0] for b in extra_brackets]
        his = [xs[i + 1] for i in crossing_pairs] + [b[1] for b in extra_brackets]
        flo = _rho_real_many(c, np.array(los), iopts)
        xt = np.array(
            [opts.refine_rel * max(1.0, abs(l)) for l in los]
        )
        xt = np.minimum(xt, (np.array(his) - np.array(los)) * 1e-3 + 1e-13)
        refined = _bisect_many(c, los, his, flo, iopts, xt)
        zeros.extend(float(x) for x in refined)

    zeros = sorted(zeros)
    degenerate = sorted(set(np.round(degenerate, 14)))

    # assemble intervals: sign between consecutive simple zeros from the grid
    pts = [left] + zeros + [right]
    intervals: list[tuple[float, float]] = []
    for a, b in zip(pts[:-1], pts[1:]):
        inside = xs[(xs > a) & (xs < b)]
        if inside.size:
            mid_val = rho[np.searchsorted(xs, inside[inside.size // 2])]
        else:
            mid_val = rho_scalar(0.5 * (a + b))
        if mid_val < 0:
            intervals.append((a, b))
    for x in degenerate:
        intervals.append((x, x))
    intervals.sort()

    window_clean = bool(rho[0] > 0 and rho[-1] > 0)
    parity = len(zeros) % 2 == 1
    labels = _even_pattern_labels(len(zeros))
    records = []
    for x, (n, sgn_lbl) in zip(zeros, labels):
        records.append(
            RamificationRecord(
                n=n,
                sign=sgn_lbl,
                value=complex(x),
                residual=abs(rho_scalar(x)) / max(1.0, float(np.abs(rho).max())),
                disk_ok=in_disk(complex(x), n),
            )
        )
    for x in degenerate:
        for sgn_lbl in ("-", "+"):
            records.append(
                RamificationRecord(
                    n=0,
                    sign=sgn_lbl,
                    value=complex(x),
                    residual=abs(rho_scalar(x)) / max(1.0, float(np.abs(rho).max())),
                    disk_ok=in_disk(complex(x), 0),
                )
            )

    return BandReport(
        intervals=tuple(intervals),
        endpoint_records=tuple(records),
        count_m=len(zeros) + 2 * len(degenerate),
        window=(left, right),
        window_clean=window_clean,
        parity_flag=parity,
    )


# --------------------------------------------------------------------------
# disk sweeps
# --------------------------------------------------------------------------

def _winding_once(c, n, nodes, iopts):
    """Winding number of the discriminant along the boundary of disk n.

    Returns (winding, max_step, log_rho_max): phase turns, the largest
    unwrapped phase increment (aliasing guard), and the log of the largest
    |rho| on the contour (scale reference for residuals).
    """
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    zc = disk_center_z(n) + DISK_RADIUS * np.exp(1j * theta)
    lams = zc**3
    tr_a, s_a, tr_b, s_b = trace_pair_logscaled_many(c, lams, iopts)
    rho_s = np.empty(nodes, dtype=complex)
    ms = np.empty(nodes)
    for k in range(nodes):
        rho_s[k], ms[k] = discriminant_scaled(
            tr_a[k], s_a[k], np.conj(tr_b[k]), s_b[k]
        )
    ph = np.angle(rho_s)
    ph = np.concatenate([ph, ph[:1]])
    unwrapped = np.unwrap(ph)
    steps = np.abs(np.diff(unwrapped))
    winding = (unwrapped[-1] - unwrapped[0]) / (2.0 * np.pi)
    log_rho_max = float(np.max(ms + np.log(np.abs(rho_s) + 1e-300)))
    return float(winding), float(steps.max()), log_rho_max


def count_disk_zeros(
    c: Coefficients, n: int, iopts: IntegratorOptions | None = None,
    nodes: int = 256, max_nodes: int = 2048,
) -> tuple[int, float]:
    """Argument-principle zero count in disk n; (count, log rho scale).

    Node count doubles until the winding is alias-safe and within 0.2 of an
    integer.  Raises CountMismatch when the settled count is not 2.
    """
    iopts = iopts or IntegratorOptions(tolerance=1e-9)
    m = nodes
    while True:
        w, max_step, log_scale = _winding_once(c, n, m, iopts)
        ok = max_step < 0.45 * np.pi and abs(w - round(w)) < 0.2
        if ok or m >= max_nodes:
            break
        m *= 2
    if not ok:
        raise CountMismatch(
            f"winding on disk {n} did not settle ({w:.3f} with {m} nodes)"
        )
    cnt = int(round(w))
    if cnt != 2:
        raise CountMismatch(f"disk {n}: expected 2 zeros, winding gives {cnt}")
    return cnt, log_scale


def _rho_entire_many(c, lams, iopts):
    T, Tc = trace_pair_many(c, np.asarray(lams, dtype=complex), iopts)
    return np.array([discriminant_trace_pair(a, b) for a, b in zip(T, Tc)])


def locate_ramifications(
    c: Coefficients,
    n_max: int,
    iopts: IntegratorOptions | None = None,
    n_min: int = 1,
    newton_steps: int = 60,
) -> list[RamificationRecord]:
    """Find the two discriminant zeros in each disk n_min..n_max (plus mirrors).

    Each disk is first certified by the winding count, then both zeros are
    refined by complex Newton (central-difference derivative) from the
    first-order perturbed starting points.  Index -n records are generated
    by conjugation.  A zero that Newton cannot settle is flagged, not fatal.
    """
    iopts = iopts or IntegratorOptions(tolerance=1e-13)
    count_opts = IntegratorOptions(tolerance=1e-9, max_steps=iopts.max_steps)
    ns = list(range(n_min, n_max + 1))
    log_scales = {}
    for n in ns:
        _, log_scales[n] = count_disk_zeros(c, n, count_opts)

    p0 = float(np.real(c.p_hat.get(0, 0.0)))
    starts = []
    for n in ns:
        # first-order shifts: the mean of p moves both zeros together, the
        # |n|-th mode splits them by |p_n|/sqrt(3) per branch (the split
        # constant follows the counting-relation chain, which the direct
        # numerics confirm)
        pn = abs(c.p_hat.get(n, 0.0)) / np.sqrt(3.0)
        base = unperturbed_ramification(n)
        shift = -1j * 4.0 * np.pi * n / np.sqrt(3.0)
        starts.append(base + shift * (p0 - pn))  # '+' branch (larger Im)
        starts.append(base + shift * (p0 + pn))  # '-' branch

    m = len(starts)
    lam = np.array(starts, dtype=complex)
    best_lam = lam.copy()
    best_abs = np.full(m, np.inf)
    no_improve = np.zeros(m, dtype=int)
    active = np.ones(m, dtype=bool)
    ok = np.zeros(m, dtype=bool)
    scale_arr = np.array([np.exp(log_scales[ns[g // 2]]) for g in range(m)])
    for _ in range(newton_steps):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        cur = lam[idx]
        delta = 1e-5 * np.maximum(1.0, np.abs(cur)) ** (2.0 / 3.0)
        pts = np.concatenate([cur, cur + delta, cur - delta])
        rho = _rho_entire_many(c, pts, iopts)
        k = idx.size
        f0, fp, fm = rho[:k], rho[k : 2 * k], rho[2 * k :]
        better = np.abs(f0) < best_abs[idx]
        bidx = idx[better]
        best_abs[bidx] = np.abs(f0)[better]
        best_lam[bidx] = cur[better]
        no_improve[bidx] = 0
        no_improve[idx[~better]] += 1
        deriv = (fp - fm) / (2.0 * delta)
        step = np.where(deriv != 0, f0 / np.where(deriv == 0, 1.0, deriv), 0.0)
        new = cur - step
        lam[idx] = new
        done = np.zeros(k, dtype=bool)
        conv = np.abs(step) <= 1e-9 * np.maximum(1.0, np.abs(new))
        ok[idx[conv]] = True
        done |= conv
        # double zeros stagnate with the residual pinned at the noise floor
        stag = no_improve[idx] >= 4
        ok[idx[stag]] = best_abs[idx[stag]] <= 1e-6 * scale_arr[idx[stag]]
        done |= stag
        z_new, _ = points_many(new)
        centers = np.array([disk_center_z(ns[g // 2]) for g in idx])
        div = np.abs(z_new - centers) > 4.0 * DISK_RADIUS
        ok[idx[div]] = False
        done |= div
        active[idx[done]] = False
    # budget exhausted: accept stagnated-at-floor iterates, flag the rest
    rest = np.nonzero(active)[0]
    ok[rest] = best_abs[rest] <= 1e-6 * scale_arr[rest]
    lam = best_lam

    records: list[RamificationRecord] = []
    res_final = _rho_entire_many(c, lam, iopts)
    for i, n in enumerate(ns):
        vals = [lam[2 * i], lam[2 * i + 1]]
        oks = [ok[2 * i], ok[2 * i + 1]]
        resid = [
            float(np.exp(np.log(np.abs(res_final[2 * i]) + 1e-300) - log_scales[n])),
            float(np.exp(np.log(np.abs(res_final[2 * i + 1]) + 1e-300) - log_scales[n])),
        ]
        order = np.argsort([v.imag for v in vals])  # smaller Im -> '-'
        pairs = [
            ("-", vals[order[0]], resid[order[0]], oks[order[0]]),
            ("+", vals[order[1]], resid[order[1]], oks[order[1]]),
        ]
        for sgn_lbl, v, r, good in pairs:
            z, _ = points_many(np.array([v]))
            dok = bool(abs(z[0] - disk_center_z(n)) < DISK_RADIUS)
            records.append(
                RamificationRecord(
                    n=n, sign=sgn_lbl, value=complex(v), residual=r,
                    disk_ok=dok, newton_ok=bool(good),
                )
            )
            flip = "+" if sgn_lbl == "-" else "-"
            records.append(
                RamificationRecord(
                    n=-n, sign=flip, value=complex(np.conj(v)), residual=r,
                    disk_ok=dok, newton_ok=bool(good),
                )
            )
    records.sort(key=lambda r: (r.n, r.sign))
    return records


# --------------------------------------------------------------------------
# asymptotic validation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RamificationFit:
    """Shift coefficients and decay diagnostics of located ramifications."""

    ns: tuple[int, ...]
    d_plus: tuple[complex, ...]
    d_minus: tuple[complex, ...]
    targets_plus: tuple[float, ...]
    targets_minus: tuple[float, ...]
    shift_residual_tail: float
    deviation_slope: float
    slope_ok: bool
    shift_ok: bool


def validate_ramification_asymptotics(
    records: list[RamificationRecord], c: Coefficients,
    residual_floor: float = 5e-2,
) -> RamificationFit:
    """Check the located zeros against the high-index laws.

    The normalized shifts d_n^{+/-} must approach p0 -/+ |p_n|/sqrt(3); the
    relative deviation from the unperturbed positions must decay like n^-2
    (log-log slope at most -1.7, with a floor for already-converged data).
    The split constant carries the 1/sqrt(3) of the counting-relation chain,
    which direct measurements reproduce to four digits.
    """
    pos = sorted({r.n for r in records if r.n >= 1})
    if not pos or max(pos) < 10:
        raise InsufficientData("need records with indices up to n >= 10")
    by_key = {(r.n, r.sign): r.value for r in records}
    p0 = float(np.real(c.p_hat.get(0, 0.0)))
    ns, dp, dm, tp, tm, devs = [], [], [], [], [], []
    for n in pos:
        if (n, "+") not in by_key or (n, "-") not in by_key:
            continue
        base = unperturbed_ramification(n)
        fac = np.sqrt(3.0) / (-4j * np.pi * n)
        pn = abs(c.p_hat.get(n, 0.0)) / np.sqrt(3.0)
        ns.append(n)
        dp.append((by_key[(n, "+")] - base) * fac)
        dm.append((by_key[(n, "-")] - base) * fac)
        tp.append(p0 - pn)
        tm.append(p0 + pn)
        devs.append(
            max(
                abs(by_key[(n, "+")] / base - 1.0),
                abs(by_key[(n, "-")] / base - 1.0),
            )
        )
    ns_a = np.array(ns)
    res = np.array(
        [max(abs(a - b), abs(x - y)) for a, b, x, y in zip(dp, tp, dm, tm)]
    )
    third = max(1, len(ns) // 3)
    tail = float(res[-third:].max())
    head = float(res[:third].max())
    shift_ok = tail <= max(head, residual_floor)

    devs_a = np.maximum(np.array(devs), 1e-14)
    if np.all(devs_a <= 1e-12):
        slope, slope_ok = 0.0, True
    else:
        slope = float(np.polyfit(np.log(ns_a), np.log(devs_a), 1)[0])
        slope_ok = slope <= -1.7
    return RamificationFit(
        ns=tuple(ns),
        d_plus=tuple(dp),
        d_minus=tuple(dm),
        targets_plus=tuple(tp),
        targets_minus=tuple(tm),
        shift_residual_tail=tail,
        deviation_slope=slope,
        slope_ok=slope_ok,
        shift_ok=shift_ok,
    )
