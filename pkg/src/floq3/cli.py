"""Batch command-line front end.

Subcommands map onto the library pipeline: trace (trace over a grid), bands
(multiplicity-3 scan + ramifications + plot grid), ramifications (disk
sweep only), eigs (periodic/antiperiodic spectra, asymptotics, optional
reconstruction cross-check), smallcoupling (band-law sweep over coupling
values).  Runs are reproducible: identical configs produce byte-identical
data files; volatile metadata (timestamp, versions) is confined to
run_meta.json.

Exit codes: 0 ok, 2 config error, 3 compute error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .coeffs import Coefficients
from .errors import InsufficientData, NonzeroPMean, SpectralError
from .eigenvalues import (
    estimate_tail_p0,
    find_eigenvalues,
    reconstruct_T,
    validate_eigenvalue_asymptotics,
)
from .monodromy import IntegratorOptions, point, propagate_many, trace_pair_many
from .multipliers import discriminant_ab, solve_multipliers
from .small_coupling import measure_band, width_law_fit
from .spectrum_scan import locate_ramifications, scan_s3


class ConfigError(Exception):
    pass


def _fmt(x: float) -> str:
    """17 significant digits, lowercase scientific: byte-stable CSV numbers."""
    return f"{float(x):.16e}"


@dataclass
class RunConfig:
    coefficients: Coefficients
    out: Path
    window: tuple[float, float] = (-50.0, 50.0)
    grid: int = 200
    nmax: int = 6
    eps: tuple[float, ...] = (0.05, 0.1, 0.2)
    tol: float = 1e-12
    max_steps: int = 200_000
    scaling_threshold: float = 1e2
    threads: int = 1
    n_range: tuple[int, int] = (-12, 12)
    reconstruct_points: int = 0
    extras: dict = field(default_factory=dict)

    @property
    def iopts(self) -> IntegratorOptions:
        return IntegratorOptions(
            tolerance=self.tol,
            max_steps=self.max_steps,
            scaling_threshold=self.scaling_threshold,
        )


def _load_config(args: argparse.Namespace) -> RunConfig:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config root must be a JSON object")
    try:
        coeffs = Coefficients.from_json_obj(cfg.get("coefficients", {}))
    except SpectralError as exc:
        raise ConfigError(f"bad coefficients: {exc}") from exc

    def pick(flag, key, default):
        return flag if flag is not None else cfg.get(key, default)

    out = Path(pick(args.out, "out", "floq3_out"))
    window = pick(
        tuple(float(v) for v in args.window.split(",")) if args.window else None,
        "window",
        (-50.0, 50.0),
    )
    window = (float(window[0]), float(window[1]))
    if not window[0] < window[1]:
        raise ConfigError(f"window must have left < right, got {window}")
    grid = int(pick(args.grid, "grid", 200))
    if grid < 16:
        raise ConfigError("grid must be >= 16")
    eps = pick(
        tuple(float(v) for v in args.eps.split(",")) if args.eps else None,
        "eps",
        (0.05, 0.1, 0.2),
    )
    tol = float(pick(args.tol, "tol", 1e-12))
    if not tol > 0:
        raise ConfigError("tol must be positive")
    max_steps = int(cfg.get("max_steps", 200_000))
    scaling_threshold = float(cfg.get("scaling_threshold", 1e2))
    if max_steps < 1 or scaling_threshold <= 0:
        raise ConfigError("max_steps must be >= 1 and scaling_threshold positive")
    threads = int(pick(args.threads, "threads", 1))
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    nmax = int(pick(args.nmax, "nmax", 6))
    n_range = cfg.get("n_range", (-12, 12))
    rc = RunConfig(
        coefficients=coeffs,
        out=out,
        window=window,
        grid=grid,
        nmax=nmax,
        eps=tuple(float(e) for e in eps),
        tol=tol,
        max_steps=max_steps,
        scaling_threshold=scaling_threshold,
        threads=threads,
        n_range=(int(n_range[0]), int(n_range[1])),
        reconstruct_points=int(cfg.get("reconstruct_points", 0)),
        extras=cfg,
    )
    try:
        rc.out.mkdir(parents=True, exist_ok=True)
        probe = rc.out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory not writable: {exc}") from exc
    return rc


def _meta(rc: RunConfig, command: str, **params) -> dict:
    opts = {
        "window": list(rc.window),
        "grid": rc.grid,
        "nmax": rc.nmax,
        "eps": list(rc.eps),
        "tol": rc.tol,
        "max_steps": rc.max_steps,
        "scaling_threshold": rc.scaling_threshold,
        "threads": rc.threads,
        "n_range": list(rc.n_range),
        **params,
    }
    return {
        "command": command,
        "coefficients_hash": rc.coefficients.content_hash(),
        "coefficients": rc.coefficients.to_json_obj(),
        "options": opts,
    }


def _write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _write_csv(path: Path, meta: dict, header: str, rows: list[str]) -> None:
    lines = [
        f"# coefficients_hash: {meta['coefficients_hash']}",
        f"# options: {json.dumps(meta['options'], sort_keys=True)}",
        header,
        *rows,
    ]
    path.write_text("\n".join(lines) + "\n")


def _write_run_meta(rc: RunConfig, command: str) -> None:
    _write_json(
        rc.out / "run_meta.json",
        {
            "command": command,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "versions": {
                "floq3": __version__,
                "numpy": np.__version__,
                "python": sys.version.split()[0],
            },
        },
    )


def _chunked_trace_pairs(rc: RunConfig, lams: np.ndarray):
    """Grid trace pair, optionally split across worker threads."""
    if rc.threads == 1 or lams.size < 4 * rc.threads:
        return trace_pair_many(rc.coefficients, lams, rc.iopts)
    chunks = np.array_split(lams, rc.threads)
    with ThreadPoolExecutor(max_workers=rc.threads) as pool:
        results = list(
            pool.map(lambda ch: trace_pair_many(rc.coefficients, ch, rc.iopts), chunks)
        )
    return (
        np.concatenate([r[0] for r in results]),
        np.concatenate([r[1] for r in results]),
    )


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_trace(rc: RunConfig) -> None:
    lams = np.linspace(rc.window[0], rc.window[1], rc.grid + 1)
    mons = propagate_many(rc.coefficients, lams, rc.iopts)
    meta = _meta(rc, "trace")
    rows = []
    for lam, m in zip(lams, mons):
        t = m.trace
        rows.append(
            ",".join([_fmt(lam), _fmt(t.real), _fmt(t.imag), _fmt(m.log_scale)])
        )
    _write_csv(rc.out / "trace.csv", meta, "lambda,re_T,im_T,log_scale", rows)
    _write_json(rc.out / "trace.json", {"meta": meta, "points": len(rows)})
    _write_run_meta(rc, "trace")


def _band_outputs(rc: RunConfig, with_grid: bool) -> None:
    c = rc.coefficients
    report = scan_s3(c, rc.window, grid=rc.grid, iopts=rc.iopts)
    records = locate_ramifications(c, rc.nmax) if rc.nmax >= 1 else []
    meta = _meta(rc, "bands")

    ram_rows = [
        ",".join(
            [
                str(r.n),
                r.sign,
                _fmt(r.value.real),
                _fmt(r.value.imag),
                _fmt(r.residual),
                str(int(r.disk_ok)),
            ]
        )
        for r in records
    ]
    _write_csv(
        rc.out / "ramifications.csv", meta, "n,sign,re,im,residual,disk_ok", ram_rows
    )
    band_obj = {
        "meta": meta,
        "intervals": [[iv[0], iv[1]] for iv in report.intervals],
        "count_m": report.count_m,
        "window_clean": report.window_clean,
        "parity_flag": report.parity_flag,
        "endpoints": [
            {
                "n": r.n,
                "sign": r.sign,
                "value": r.value.real,
                "residual": r.residual,
                "disk_ok": r.disk_ok,
            }
            for r in report.endpoint_records
        ],
    }
    _write_json(rc.out / "bands.json", band_obj)

    if with_grid:
        lams = np.linspace(rc.window[0], rc.window[1], rc.grid + 1)
        T, Tc = _chunked_trace_pairs(rc, lams)
        rows = []
        for lam, t, tc in zip(lams, T, Tc):
            rho = discriminant_ab(t, lam).rho.real
            trip = solve_multipliers(t, tc, point(lam))
            dl = trip.lyapunov
            real_ok = all(
                abs(d.imag) <= 1e-8 * max(1.0, abs(d)) and -1 - 1e-8 <= d.real <= 1 + 1e-8
                for d in dl
            )
            rows.append(
                ",".join(
                    [_fmt(lam), _fmt(rho)]
                    + [_fmt(v) for d in dl for v in (d.real, d.imag)]
                    + [str(int(real_ok))]
                )
            )
        _write_csv(
            rc.out / "bandgrid.csv",
            meta,
            "lambda,rho,re_d1,im_d1,re_d2,im_d2,re_d3,im_d3,s3_marker",
            rows,
        )
    _write_run_meta(rc, "bands")


def cmd_bands(rc: RunConfig) -> None:
    _band_outputs(rc, with_grid=True)


def cmd_ramifications(rc: RunConfig) -> None:
    records = locate_ramifications(rc.coefficients, rc.nmax)
    meta = _meta(rc, "ramifications")
    rows = [
        ",".join(
            [
                str(r.n),
                r.sign,
                _fmt(r.value.real),
                _fmt(r.value.imag),
                _fmt(r.residual),
                str(int(r.disk_ok)),
            ]
        )
        for r in records
    ]
    _write_csv(
        rc.out / "ramifications.csv", meta, "n,sign,re,im,residual,disk_ok", rows
    )
    _write_json(
        rc.out / "ramifications.json",
        {
            "meta": meta,
            "records": [
                {
                    "n": r.n,
                    "sign": r.sign,
                    "re": r.value.real,
                    "im": r.value.imag,
                    "residual": r.residual,
                    "disk_ok": r.disk_ok,
                    "newton_ok": r.newton_ok,
                }
                for r in records
            ],
        },
    )
    _write_run_meta(rc, "ramifications")


def cmd_eigs(rc: RunConfig) -> None:
    c = rc.coefficients
    per = find_eigenvalues(c, "periodic", rc.n_range, rc.iopts)
    ap = find_eigenvalues(c, "antiperiodic", rc.n_range, rc.iopts)
    fits = {}
    for lst in (per, ap):
        fit = validate_eigenvalue_asymptotics(lst, c)
        fits[lst.kind] = {
            "e_head": fit.e_head,
            "e_tail": fit.e_tail,
            "e_trend_ok": fit.e_trend_ok,
            "deviation_slope": fit.deviation_slope,
            "slope_ok": fit.slope_ok,
        }
    meta = _meta(rc, "eigs")
    rows = [
        ",".join([lst.kind, str(e.n), _fmt(e.value), _fmt(e.residual)])
        for lst in (per, ap)
        for e in lst.entries
    ]
    _write_csv(rc.out / "eigs.csv", meta, "kind,n,value,residual", rows)
    recon = []
    if rc.reconstruct_points > 0:
        lo, hi = sorted((per.entries[0].value, per.entries[-1].value))
        sample = np.linspace(lo * 0.5, hi * 0.5, rc.reconstruct_points)
        tail_p0 = estimate_tail_p0(per, ap)
        T, _ = trace_pair_many(c, sample, rc.iopts)
        for lam, t in zip(sample, T):
            tr = reconstruct_T(per, ap, float(lam), tail_p0)
            recon.append(
                {
                    "lambda": float(lam),
                    "rel_err": abs(tr - t) / max(1.0, abs(t)),
                }
            )
    _write_json(
        rc.out / "eigs.json",
        {"meta": meta, "fits": fits, "reconstruction": recon},
    )
    _write_run_meta(rc, "eigs")


def cmd_smallcoupling(rc: RunConfig) -> None:
    c = rc.coefficients
    measured = [measure_band(c, e) for e in rc.eps]
    meta = _meta(rc, "smallcoupling")
    entries = []
    rows = []
    for m in measured:
        p = m.prediction
        entries.append(
            {
                "epsilon": p.epsilon,
                "h": p.h,
                "b2": p.b2,
                "b3": p.b3,
                "predicted": [p.r_minus, p.r_plus] if p.kind == "band" else None,
                "measured": list(m.interval) if m.interval else None,
                "width_ratio": None if np.isnan(m.width_ratio) else m.width_ratio,
            }
        )
        rows.append(
            ",".join(
                [
                    _fmt(p.epsilon),
                    _fmt(p.h),
                    p.kind,
                    _fmt(m.width),
                    _fmt(p.width_leading),
                ]
            )
        )
    fit = None
    if sum(1 for m in measured if m.interval) >= 2:
        s, cpre = width_law_fit(measured)
        fit = {"exponent": s, "prefactor": cpre}
    _write_csv(
        rc.out / "smallcoupling.csv",
        meta,
        "epsilon,h,kind,width_measured,width_predicted",
        rows,
    )
    _write_json(rc.out / "smallcoupling.json", {"meta": meta, "entries": entries, "fit": fit})
    _write_run_meta(rc, "smallcoupling")


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

_COMMANDS = {
    "trace": cmd_trace,
    "bands": cmd_bands,
    "ramifications": cmd_ramifications,
    "eigs": cmd_eigs,
    "smallcoupling": cmd_smallcoupling,
}


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="floq3",
        description="Spectral data of the third-order periodic operator",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--window", help="A,B real window")
        p.add_argument("--grid", type=int, help="grid subdivisions (>= 16)")
        p.add_argument("--nmax", type=int, help="max disk index")
        p.add_argument("--eps", help="comma-separated coupling values")
        p.add_argument("--tol", type=float, help="integrator tolerance")
        p.add_argument("--threads", type=int, help="worker threads for grids")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        rc = _load_config(args)
        if args.command == "smallcoupling" and rc.coefficients.p_hat.get(0, 0) != 0:
            raise ConfigError(
                "smallcoupling requires a mean-zero p "
                f"(p mean = {rc.coefficients.p_hat[0]})"
            )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        _COMMANDS[args.command](rc)
    except (SpectralError, InsufficientData, NonzeroPMean) as exc:
        print(f"compute error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
