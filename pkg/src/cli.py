"""Command-line front end.

Subcommands: gen-field, run-ipm, front-speed, reference-2d, stats.
Every command writes into ``<out>/<command>-<config hash[:12]>/`` and
finishes with ``manifest.json``. Exit codes: 0 success, 2 config or
precondition error, 3 numerical / runtime error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import ipm, rng
from .config import (
    RunConfig,
    apply_overrides,
    field_source,
    load_config,
    make_domain,
    make_dual,
    make_engine,
    make_flow,
    make_ipm_params,
)
from .ensemble_stats import MomentRecorder, diffusion_exponent, histogram, torus_projection
from .errors import ConfigError, ContractError, KppError
from .eulerian import make_grid, run_mu_sl, spectral_eigen
from .front_speed import LAMBDA_COUNT, LAMBDA_MAX, LAMBDA_MIN, REFINE_POINTS, sweep_amplitude
from .outputs import RunManifest, command_dir, finish_run, write_csv, write_json
from .random_field import (
    correlation_empirical,
    correlation_exact,
    correlation_truncated,
    mode_amplitudes,
    realization_to_dict,
    refinement_l2_differences,
    sample_realization,
    truncation_error_bound,
    wavenumbers,
)
from .spectra import get_spectrum

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
DEFAULT_OUT = "runs"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_gen_field(cfg: RunConfig, out_root: str | Path) -> RunManifest:
    """Realization JSON, coefficient table, correlation table, truncation bound, refinement table."""
    started = time.perf_counter()
    fc = cfg.field
    source = field_source(cfg)
    spectrum = get_spectrum(source.spectrum)
    field_seed, delta_k, n_f = source.seed, source.delta_k, source.n_f
    realization = sample_realization(spectrum, delta_k, n_f, field_seed)
    out = command_dir(out_root, "gen-field", cfg)
    print(f"[field] spectrum={spectrum.name} n_f={n_f} delta_k={delta_k:.6g} -> {out}")

    k = wavenumbers(delta_k, n_f)
    amps = mode_amplitudes(spectrum, delta_k, n_f)
    coeff_rows = zip(range(n_f + 1), k, amps, realization.zeta, realization.eta)

    r_values = np.linspace(0.0, fc.r_max, fc.r_count)
    exact = correlation_exact(spectrum, delta_k, 1, r_values)
    truncated = correlation_truncated(spectrum, delta_k, 1, r_values, n_f)
    corr_rows = []
    for r, ex, tr in zip(r_values, exact, truncated):
        emp = correlation_empirical(
            spectrum, delta_k, n_f, float(r), fc.correlation_seeds,
            n_points=fc.correlation_points, seed=field_seed,
        )
        corr_rows.append((r, ex, tr, emp.value, emp.stderr))

    refine_seeds = [rng.derive_seed(field_seed, "field", s) for s in range(fc.refine_seeds)]
    levels = refinement_l2_differences(
        spectrum, delta_k, max(n_f, 1), fc.refine_levels, refine_seeds, n_grid=fc.refine_grid,
    )

    outputs = [
        write_json(out / "field.json", realization_to_dict(realization)),
        write_csv(out / "coefficients.csv", ["j", "k", "amplitude", "zeta", "eta"], coeff_rows),
        write_csv(
            out / "correlation.csv",
            ["r", "exact", "truncated", "empirical", "empirical_stderr"],
            corr_rows,
        ),
        write_json(
            out / "truncation.json",
            {"n_f": n_f, "bound": truncation_error_bound(spectrum, delta_k, n_f)},
        ),
        write_csv(
            out / "refinement.csv",
            ["level", "n_f", "l2_mean", "l2_stderr"],
            [(j, max(n_f, 1) * 2**j, e.value, e.stderr) for j, e in enumerate(levels)],
        ),
    ]
    return finish_run(out, "gen-field", cfg, outputs, time.perf_counter() - started, {"field": field_seed})


def cmd_run_ipm(cfg: RunConfig, out_root: str | Path) -> RunManifest:
    """μ trace, per-mutation PFGR table, final ensemble snapshot and a summary."""
    started = time.perf_counter()
    flow = make_flow(cfg)
    dual = make_dual(cfg)
    domain = make_domain(cfg, flow)
    params = make_ipm_params(cfg)
    out = command_dir(out_root, "run-ipm", cfg)
    print(f"[ipm] {flow.base.name} delta={flow.delta:g} lambda={dual.lam:g} N={params.n_particles} "
          f"M={params.n_generations} H={params.n_mutations} -> {out}")

    trace, ens = ipm.run(flow, dual, cfg.kpp, params, domain)
    summary = {"mu": trace.mu, "mu_tail_mean": trace.tail_mean(cfg.ipm.tail), "lambda": dual.lam, "e": list(dual.e)}
    if params.n_generations >= 3:
        slope, stderr = ipm.stationarity_slope(trace)
        summary.update(stationarity_slope=slope, stationarity_stderr=stderr)
        if abs(slope) >= 2.0 * stderr > 0:
            print(f"[ipm] WARNING: mu trace still drifting (slope {slope:.3e} +/- {stderr:.1e}); "
                  "raise n_generations")
    print(f"[ipm] mu={trace.mu:.8f}")

    snapshot = ens.positions
    if cfg.ipm.wrap_snapshot:
        snapshot = torus_projection(ens, flow.period).positions
    pfgr = trace.per_mutation_pfgr
    outputs = [
        write_csv(
            out / "mu_trace.csv",
            ["generation", "t", "mu"],
            [(j + 1, (j + 1) * params.life_span, mu) for j, mu in enumerate(trace.per_generation_mu)],
        ),
        write_csv(
            out / "pfgr.csv",
            ["generation", "mutation", "pfgr"],
            [(j + 1, i, pfgr[j, i]) for j in range(pfgr.shape[0]) for i in range(pfgr.shape[1])],
        ),
        write_csv(out / "snapshot.csv", [f"x{d + 1}" for d in range(ens.dim)], snapshot),
        write_json(out / "summary.json", summary),
    ]
    seeds = {"ipm": params.seed}
    if flow.perturbation is not None:
        seeds["field"] = flow.perturbation.seed
    return finish_run(out, "run-ipm", cfg, outputs, time.perf_counter() - started, seeds)


def cmd_front_speed(cfg: RunConfig, out_root: str | Path) -> RunManifest:
    """Amplitude sweep of c*: samples, per-seed rows, per-δ summary and the log-log fit."""
    started = time.perf_counter()
    fs = cfg.front_speed
    flow = make_flow(cfg)
    query = fs.query(flow)
    out = command_dir(out_root, "front-speed", cfg)
    print(f"[front-speed] {flow.base.name} estimator={fs.estimator} e_search={query.e_search.kind} "
          f"deltas={list(fs.deltas)} seeds={list(fs.seeds)} -> {out}")

    table = sweep_amplitude(
        fs.deltas, query, flow, cfg.kpp, make_engine(cfg), fs.seeds,
        master_seed=cfg.seed, fit_min_delta=fs.fit_min_delta,
    )
    d = flow.dim
    e_cols = [f"e{i + 1}" for i in range(d)]
    fit = None
    if table.fit is not None:
        fit = {"slope": table.fit.slope, "intercept": table.fit.intercept, "stderr": table.fit.stderr}
        print(f"[front-speed] log-log slope={table.fit.slope:.4f} +/- {table.fit.stderr:.4f}")
    edges = (min(query.lambda_grid), max(query.lambda_grid))
    for row in table.rows:
        if row.lambda_opt in edges:
            print(f"[front-speed] WARNING: delta={row.delta:g} seed={row.seed}: optimal lambda "
                  f"{row.lambda_opt:.4g} sits on the grid edge; widen lambda_grid")
    outputs = [
        write_csv(
            out / "samples.csv",
            ["delta", "seed", "lambda", *e_cols, "mu", "ratio"],
            [(delta, seed, s.lam, *s.e, s.mu, s.ratio) for delta, seed, s in table.samples],
        ),
        write_csv(
            out / "sweep.csv",
            ["delta", "seed", "c_star", "lambda_opt", *e_cols],
            [(r.delta, r.seed, r.c_star, r.lambda_opt, *r.e_opt) for r in table.rows],
        ),
        write_csv(
            out / "summary.csv",
            ["delta", "c_star_mean", "c_star_stderr", "n_seeds"],
            table.summary,
        ),
        write_json(
            out / "fit.json",
            {
                "fit": fit,
                "fit_min_delta": fs.fit_min_delta,
                "lambda_grid": list(query.lambda_grid),
                "lambda_policy": {
                    "default_grid": [LAMBDA_MIN, LAMBDA_MAX, LAMBDA_COUNT],
                    "refine": query.refine,
                    "refine_points": REFINE_POINTS,
                },
                "e_search": {
                    "kind": query.e_search.kind,
                    "half_angle_deg": query.e_search.half_angle_deg,
                    "n_samples": query.e_search.n_samples,
                    "from_flow": fs.e_search is None,
                },
            },
        ),
    ]
    seeds = {"master": cfg.seed}
    return finish_run(out, "front-speed", cfg, outputs, time.perf_counter() - started, seeds)


def cmd_reference2d(cfg: RunConfig, out_root: str | Path) -> RunManifest:
    """μ from SL+CN and/or the collocation eigensolver for one dual pair."""
    started = time.perf_counter()
    flow = make_flow(cfg)
    if flow.dim != 2:
        raise ConfigError(f"reference-2d needs a 2D flow, got {flow.dim}D")
    dual = make_dual(cfg)
    eu = cfg.eulerian
    out = command_dir(out_root, "reference-2d", cfg)
    rows = []
    outputs = []
    if "sl_cn" in eu.methods:
        result = run_mu_sl(
            make_grid(eu.n_per_dim, flow.period[0]), flow, dual, cfg.kpp, eu.dt, eu.n_steps, eu.burn_in,
        )
        print(f"[sl-cn] mu={result.mu:.8f}")
        rows.append(("sl_cn", result.mu))
        outputs.append(write_csv(
            out / "sl_increments.csv",
            ["step", "log_mass_increment"],
            enumerate(result.increments, start=1),
        ))
        grid = result.grid
        nodes = grid.nodes()
        outputs.append(write_csv(
            out / "sl_snapshot.csv",
            ["x", "y", "q"],
            zip(nodes[:, 0], nodes[:, 1], grid.q.ravel()),
        ))
    if "spectral" in eu.methods:
        mu = spectral_eigen(
            flow, dual, cfg.kpp, eu.spectral_n_per_dim, axes=eu.spectral_axes, verbose=True,
        )
        rows.append(("spectral", mu))
    outputs.append(write_csv(out / "reference.csv", ["method", "mu"], rows))
    seeds = {"field": flow.perturbation.seed} if flow.perturbation is not None else {}
    return finish_run(out, "reference-2d", cfg, outputs, time.perf_counter() - started, seeds)


def cmd_stats(cfg: RunConfig, out_root: str | Path) -> RunManifest:
    """Moment series, diffusion exponents and histograms of the projected final ensemble."""
    started = time.perf_counter()
    flow = make_flow(cfg)
    dual = make_dual(cfg)
    domain = make_domain(cfg, flow)
    params = make_ipm_params(cfg)
    st = cfg.stats
    out = command_dir(out_root, "stats", cfg)
    print(f"[stats] {flow.base.name} domain={domain.kind} shift={params.dynamic_shift} -> {out}")

    recorder = MomentRecorder(params.life_span)
    _, ens = ipm.run(flow, dual, cfg.kpp, params, domain, on_generation=recorder)
    series = recorder.series()
    projected = torus_projection(ens, domain.period)

    d = ens.dim
    exponents = []
    hist_rows = []
    for axis in range(d):
        fit = diffusion_exponent(series, axis, st.tail_fraction)
        lo, hi = st.hist_range if st.hist_range is not None else (0.0, domain.period[axis])
        hist = histogram(projected, axis, st.n_bins, (lo, hi))
        exponents.append({
            "dim": axis + 1, "exponent": fit.slope, "stderr": fit.stderr,
            "underflow": hist.underflow, "overflow": hist.overflow,
        })
        hist_rows.extend(
            (axis + 1, hist.edges[b], hist.edges[b + 1], hist.counts[b]) for b in range(st.n_bins)
        )
        print(f"[stats] D(x{axis + 1}) = O(t^{fit.slope:.3f})")

    outputs = [
        write_csv(
            out / "moments.csv",
            ["t", *[f"E{i + 1}" for i in range(d)], *[f"D{i + 1}" for i in range(d)]],
            [(t, *c, *v) for t, c, v in zip(series.times, series.center, series.second_moment)],
        ),
        write_csv(out / "histogram.csv", ["dim", "bin_lo", "bin_hi", "count"], hist_rows),
        write_json(out / "exponents.json", {"tail_fraction": st.tail_fraction, "dims": exponents}),
    ]
    return finish_run(out, "stats", cfg, outputs, time.perf_counter() - started, {"ipm": params.seed})


COMMANDS = {
    "gen-field": cmd_gen_field,
    "run-ipm": cmd_run_ipm,
    "front-speed": cmd_front_speed,
    "reference-2d": cmd_reference2d,
    "stats": cmd_stats,
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kppfl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        cmd = sub.add_parser(name, help=fn.__doc__.splitlines()[0])
        cmd.add_argument("--config", type=str, default=None, help="JSON run configuration")
        cmd.add_argument("--out", type=str, default=DEFAULT_OUT, help="output root directory")
        cmd.add_argument("--threads", type=int, default=None,
                         help="worker threads (speed only; falls back to KPPFL_THREADS)")
        cmd.add_argument("--seed", type=int, default=None, help="override the master seed")
        if name == "run-ipm":
            cmd.add_argument("--wrap", action="store_true",
                             help="write the snapshot mapped into one flow period (x mod L)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = apply_overrides(
            load_config(args.config), seed=args.seed, threads=args.threads,
            wrap_snapshot=getattr(args, "wrap", False),
        )
        manifest = COMMANDS[args.command](cfg, args.out)
    except (ConfigError, ContractError) as exc:
        print(f"[cli] error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KppError as exc:
        print(f"[cli] error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"[cli] {args.command} done in {manifest.wall_clock_s:.1f}s ({len(manifest.outputs)} files)")
    return EXIT_OK
