"""Experiment runner: named experiments over the simulator and analytic paths.

``cellsec run <spec.json> --out <dir>`` executes one experiment spec and writes
a CSV of plottable rows (x, y, y_err, series) plus a rendered figure;
``cellsec validate <spec.json>`` reports every config problem without running.
Spec names fig3..fig8 resolve to packaged presets.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import __version__, analytic, geometry, montecarlo
from .errors import DomainError, NumericsError, ResourceError
from .params import (
    CooperationConfig,
    SystemParams,
    params_from_dict,
    params_to_dict,
    validate_raw_config,
)

KINDS = (
    "outage_vs_snr",
    "rate_vs_snr",
    "rate_vs_density",
    "cdf_validation",
    "laplace_validation",
    "percolation",
)
MC_PATHS = ("montecarlo_exact", "montecarlo_ball")
ALL_PATHS = MC_PATHS + ("analytic", "lower_bound")
SWEEPABLE = (
    "snr_db",
    "snr_linear",
    "n_antennas",
    "users_per_cell",
    "load_ratio",
    "path_loss_exp",
    "bs_density",
    "regularizer",
    "s",
    "coop_radius",
)
ENV_WORKERS = "CELLSEC_WORKERS"

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


@dataclass
class ExperimentSpec:
    kind: str
    base: dict
    sweep_key: str
    sweep_values: list
    n_geometries: int = 200
    n_fadings: int = 50
    seed: int | None = None
    paths: list[str] = field(default_factory=lambda: ["analytic"])
    variants: list[dict] = field(default_factory=lambda: [{"label": "", "overrides": {}}])
    percolation: dict = field(default_factory=dict)
    name: str = "experiment"


def load_experiment_spec(path_or_obj) -> ExperimentSpec:
    if isinstance(path_or_obj, dict):
        raw, name = path_or_obj, path_or_obj.get("name", "experiment")
    else:
        with open(path_or_obj, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        name = raw.get("name") or os.path.splitext(os.path.basename(path_or_obj))[0]
    sweep = raw.get("sweep", {})
    mc = raw.get("mc", {})
    return ExperimentSpec(
        kind=raw.get("kind", ""),
        base=raw.get("base", {}),
        sweep_key=sweep.get("key", ""),
        sweep_values=sweep.get("values", []),
        n_geometries=int(mc.get("n_geometries", 200)),
        n_fadings=int(mc.get("n_fadings", 50)),
        seed=mc.get("seed"),
        paths=list(raw.get("paths", ["analytic"])),
        variants=list(raw.get("variants", [{"label": "", "overrides": {}}])),
        percolation=raw.get("percolation", {}),
        name=name,
    )


def validate_spec(spec: ExperimentSpec) -> list[str]:
    """Every problem with the experiment spec, without running anything."""
    problems = []
    if spec.kind not in KINDS:
        problems.append(f"unknown kind {spec.kind!r}; expected one of {KINDS}")
    if not spec.sweep_values:
        problems.append("sweep.values must be a nonempty list")
    if spec.sweep_key not in SWEEPABLE:
        problems.append(f"sweep.key {spec.sweep_key!r} is not sweepable {SWEEPABLE}")
    bad_paths = [p for p in spec.paths if p not in ALL_PATHS]
    if bad_paths:
        problems.append(f"unknown paths: {bad_paths}")
    needs_seed = (
        any(p in MC_PATHS for p in spec.paths)
        or spec.kind in ("cdf_validation", "laplace_validation", "percolation")
    )
    if needs_seed and spec.seed is None:
        problems.append("mc.seed is required whenever a Monte Carlo path runs")
    if spec.kind == "percolation" and "coop_radius" not in spec.percolation and spec.sweep_key != "coop_radius":
        problems.append("percolation experiments need percolation.coop_radius or a coop_radius sweep")
    for variant in spec.variants:
        label = variant.get("label", "")
        cfg = dict(spec.base)
        cfg.update(variant.get("overrides", {}))
        if spec.sweep_key in ("s", "coop_radius"):
            cfg.setdefault("snr_db", 10.0)
        else:
            cfg.pop("snr_db", None) if spec.sweep_key == "snr_linear" else None
            cfg.pop("snr_linear", None) if spec.sweep_key == "snr_db" else None
            cfg[spec.sweep_key] = spec.sweep_values[0] if spec.sweep_values else 1.0
        for msg in validate_raw_config(cfg):
            problems.append(f"variant {label!r}: {msg}")
    return problems


def _resolve_point(spec: ExperimentSpec, variant: dict, value) -> SystemParams:
    cfg = dict(spec.base)
    cfg.update(variant.get("overrides", {}))
    if spec.sweep_key not in ("s", "coop_radius"):
        if spec.sweep_key == "snr_db":
            cfg.pop("snr_linear", None)
        elif spec.sweep_key == "snr_linear":
            cfg.pop("snr_db", None)
        cfg[spec.sweep_key] = value
    return params_from_dict(cfg)


def _series(path: str, variant: dict) -> str:
    label = variant.get("label", "")
    return f"{path}|{label}" if label else path


def _run_point(spec: ExperimentSpec, variant: dict, value, out_dir: str | None):
    """All rows for one (variant, sweep value) pair."""
    rows = []
    params = _resolve_point(spec, variant, value)
    if spec.kind in ("outage_vs_snr", "rate_vs_snr", "rate_vs_density"):
        outage = spec.kind == "outage_vs_snr"
        for path in spec.paths:
            if path in MC_PATHS:
                mode = "exact" if path == "montecarlo_exact" else "ball_approx"
                est_fn = montecarlo.estimate_outage if outage else montecarlo.estimate_mean_rate
                est = est_fn(params, mode, spec.n_geometries, spec.n_fadings, spec.seed)
                rows.append(_row(value, est.mean, est.std_error, _series(path, variant)))
            elif path == "analytic":
                y = analytic.outage_probability(params) if outage else analytic.mean_secrecy_rate(params)
                rows.append(_row(value, y, None, _series(path, variant)))
            elif path == "lower_bound":
                if outage:
                    raise DomainError("lower_bound is a rate path, not an outage path")
                rows.append(_row(value, analytic.mean_rate_lower_bound(params), None,
                                 _series(path, variant)))
    elif spec.kind == "cdf_validation":
        n = spec.n_geometries * spec.n_fadings
        interf, leak = montecarlo.collect_interference_leakage(
            params, n, condition="fixed", seed=spec.seed
        )
        for samples, moments in (
            (interf, analytic.interference_moments(params.cell_radius, params)),
            (leak, analytic.leakage_moments(params)),
        ):
            fit = analytic.lognormal_fit(moments)
            rows.append(_row(value, _ks_distance(samples.values, fit),
                             None, _series(samples.label + "_ks", variant)))
            if out_dir:
                tag = variant.get("label", "").replace("=", "")
                fname = f"samples_{samples.label}_{tag}_{value}.txt".replace("/", "_")
                montecarlo.write_sample_dump(os.path.join(out_dir, fname), samples)
    elif spec.kind == "laplace_validation":
        n = spec.n_geometries * spec.n_fadings
        interf, leak = montecarlo.collect_interference_leakage(
            params, n, condition="fixed", seed=spec.seed
        )
        s = float(value)
        pairs = (
            ("interference", interf, analytic.laplace_interference(s, params.cell_radius, params)),
            ("leakage", leak, analytic.laplace_leakage(s, params)),
        )
        for label, samples, closed in pairs:
            probe = np.exp(-s * samples.values)
            rows.append(_row(value, closed, None, _series(label + "_transform", variant)))
            rows.append(_row(value, float(probe.mean()),
                             float(probe.std(ddof=1) / math.sqrt(len(probe))),
                             _series(label + "_empirical", variant)))
    elif spec.kind == "percolation":
        coop_radius = float(value) if spec.sweep_key == "coop_radius" else float(
            spec.percolation["coop_radius"]
        )
        coop = CooperationConfig(coop_radius=coop_radius)
        window = 0.5 * float(spec.percolation.get("window_extent_in_coop_radii", 20.0)) * coop_radius
        connect = spec.percolation.get("connect_distance")
        fractions = np.empty(spec.n_geometries)
        report = None
        for t in range(spec.n_geometries):
            report = geometry.percolation_report(
                params, coop, window, montecarlo.trial_rng(spec.seed, t), connect
            )
            fractions[t] = report.largest_cluster_fraction
        se = float(fractions.std(ddof=1) / math.sqrt(len(fractions))) if len(fractions) > 1 else 0.0
        rows.append(_row(value, float(fractions.mean()), se, _series("cluster_fraction", variant)))
        rows.append(_row(value, float(report.supercritical), None, _series("supercritical", variant)))
    else:
        raise DomainError(f"unknown kind {spec.kind!r}")
    return rows


def _row(x, y, y_err, series):
    return {"x": x, "y": y, "y_err": y_err, "series": series}


def _ks_distance(values: np.ndarray, fit) -> float:
    x = np.sort(values)
    cdf = fit.cdf(x)
    n = len(x)
    steps = np.arange(1, n + 1) / n
    return float(max(np.max(np.abs(steps - cdf)), np.max(np.abs(steps - 1.0 / n - cdf))))


def run_experiment(spec: ExperimentSpec, out_dir: str | None = None, workers: int = 1):
    """Execute every (variant, sweep value) point; returns (rows, metadata).

    Points are dispatched to a process pool when workers > 1; output order is
    the spec order regardless of completion order, and results do not depend
    on the worker count.
    """
    problems = validate_spec(spec)
    if problems:
        raise DomainError("; ".join(problems))
    tasks = [(variant, value) for variant in spec.variants for value in spec.sweep_values]
    rows: list[dict] = []
    failure: Exception | None = None
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_point, spec, v, x, out_dir) for v, x in tasks]
            for fut in futures:
                try:
                    rows.extend(fut.result())
                except (NumericsError, ResourceError) as exc:
                    failure = exc
                    break
    else:
        for variant, value in tasks:
            try:
                rows.extend(_run_point(spec, variant, value, out_dir))
            except (NumericsError, ResourceError) as exc:
                failure = exc
                break
    meta = _metadata(spec)
    if failure is not None:
        return rows, meta, failure
    return rows, meta, None


def _metadata(spec: ExperimentSpec) -> dict:
    resolved = {}
    for variant in spec.variants:
        try:
            p = _resolve_point(spec, variant, spec.sweep_values[0])
            resolved[variant.get("label", "")] = params_to_dict(p)
        except DomainError:
            pass
    return {
        "version": __version__,
        "spec": dataclasses.asdict(spec),
        "resolved_base_params": resolved,
    }


def write_rows_csv(path: str, rows: list[dict], meta: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# cellsec {meta['version']}\n")
        fh.write(f"# spec: {json.dumps(meta['spec'], sort_keys=True)}\n")
        fh.write(f"# resolved: {json.dumps(meta['resolved_base_params'], sort_keys=True)}\n")
        fh.write("x,y,y_err,series\n")
        for row in rows:
            err = "" if row["y_err"] is None else repr(float(row["y_err"]))
            fh.write(f"{float(row['x'])!r},{float(row['y'])!r},{err},{row['series']}\n")


def preset_path(name: str) -> str:
    """Filesystem path of a packaged experiment preset (fig3 .. fig8)."""
    ref = resources.files("cellsec").joinpath("presets", f"{name}.json")
    if not ref.is_file():
        raise FileNotFoundError(name)
    return str(ref)


def _resolve_spec_arg(arg: str) -> str:
    if os.path.exists(arg):
        return arg
    try:
        return preset_path(arg)
    except FileNotFoundError:
        return arg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cellsec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment spec")
    run_p.add_argument("spec", help="spec JSON path or preset name (fig3 .. fig8)")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--workers", type=int, default=None,
                       help=f"worker processes (default ${ENV_WORKERS} or 1)")
    run_p.add_argument("--seed", type=int, default=None, help="override mc.seed")
    run_p.add_argument("--no-plot", action="store_true", help="skip figure rendering")

    val_p = sub.add_parser("validate", help="list spec problems without running")
    val_p.add_argument("spec")

    args = parser.parse_args(argv)

    spec_path = _resolve_spec_arg(args.spec)
    try:
        spec = load_experiment_spec(spec_path)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read spec: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        problems = validate_spec(spec)
        for p in problems:
            print(p)
        if not problems:
            print("ok")
        return EXIT_CONFIG if problems else 0

    if args.seed is not None:
        spec.seed = args.seed
    workers = args.workers
    if workers is None:
        workers = int(os.environ.get(ENV_WORKERS, "1"))

    problems = validate_spec(spec)
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return EXIT_CONFIG

    os.makedirs(args.out, exist_ok=True)
    try:
        rows, meta, failure = run_experiment(spec, out_dir=args.out, workers=workers)
    except DomainError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG

    csv_path = os.path.join(args.out, f"{spec.name}.csv")
    write_rows_csv(csv_path, rows, meta)
    print(csv_path)
    if not args.no_plot and rows:
        from . import plotting

        png_path = os.path.join(args.out, f"{spec.name}.png")
        plotting.render_rows(rows, meta, png_path)
        print(png_path)
    if failure is not None:
        print(f"numeric failure after {len(rows)} rows: {failure}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
