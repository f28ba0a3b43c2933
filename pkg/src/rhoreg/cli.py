"""Command-line front end: ``fit``, ``simulate`` and ``table`` subcommands.

Exit codes: 0 success, 1 usage or input/output error, 2 estimator
nonexistence (the MLE on separable data).  All randomness flows from the
master seed in the config; nothing is drawn from the environment.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import dataset as ds_io
from .baselines import median_estimate, mle, scenario_initializer
from .cmaes import OptimizerSettings
from .config import ExperimentConfig, load_config
from .errors import RhoregError
from .families import get_family
from .models import get_model
from .rho import RhoConfig, rho_estimate
from .risk import mixture_approximation_error, risk_mc
from .scenarios import ContaminationSpec, build_scenario, generate

CSV_COLUMNS = [
    "scenario", "estimator", "R_n", "std_err", "excess_vs_rho",
    "iterQ1", "iterMed", "iterQ3", "iterMax", "mean_seconds", "failures",
]

_MODEL_FOR_FAMILY = {
    "bernoulli": "linear",
    "poisson": "loglog1pexp",
    "exponential": "log1pexp",
}


def _fail(message: str, code: int = 1):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _optimizer_settings(overrides: dict) -> OptimizerSettings:
    kwargs = {}
    for src, dst in (
        ("max_evals", "max_evals"),
        ("population", "population"),
        ("sigma0", "sigma0"),
        ("restarts", "restarts"),
    ):
        if src in overrides:
            kwargs[dst] = overrides[src]
    return OptimizerSettings(**kwargs)


def _rho_config(overrides: dict, seed: int) -> RhoConfig:
    cfg = RhoConfig(seed=seed, sup_search=_optimizer_settings(overrides))
    if "early_stop" in overrides:
        cfg.early_stop = float(overrides["early_stop"])
    if "max_iters" in overrides:
        cfg.max_iters_L = int(overrides["max_iters"])
    return cfg


@click.group()
def main():
    """Robust exponential-family regression: rho-estimation toolkit."""


@main.command("fit")
@click.option("--scenario", "scenario_id", default=None, help="Generate data from a registered scenario.")
@click.option("--data", "data_path", default=None, type=click.Path(), help="Fit a dataset CSV (w1..wd,y,flag).")
@click.option("--family", "family_name", default=None, help="Family for --data fits.")
@click.option("--model", "model_kind", default=None, help="Model kind for --data fits (default: the family's standard link).")
@click.option("--estimator", default="rho", show_default=True, help="rho | mle | median.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--n", default=None, type=int, help="Sample size override for --scenario.")
@click.option("--config", "config_path", default=None, type=click.Path(), help="Optional config file supplying optimizer overrides.")
@click.option("--out", "out_path", default=None, type=click.Path(), help="Where to write the result JSON (default: stdout).")
def cmd_fit(scenario_id, data_path, family_name, model_kind, estimator,
            seed, n, config_path, out_path):
    """Fit one estimator on one dataset and emit a JSON result.

    Exits 0 on success, 2 when the requested estimator does not exist for
    the data (MLE nonexistence), 1 on usage errors.
    """
    overrides = {}
    if config_path is not None:
        try:
            overrides = load_config(config_path).overrides
        except RhoregError as exc:
            _fail(str(exc))
    if (scenario_id is None) == (data_path is None):
        _fail("exactly one of --scenario or --data is required")
    try:
        if scenario_id is not None:
            scen = build_scenario(scenario_id, n=n)
            data = generate(scen, seed)
            fam, model = scen.family, scen.model
        else:
            if family_name is None:
                _fail("--data requires --family")
            data = ds_io.load_csv(data_path)
            fam = get_family(family_name)
            kind = model_kind or _MODEL_FOR_FAMILY.get(family_name)
            if kind is None:
                _fail(f"--model is required for family '{family_name}'")
            model = get_model(kind, covariate_dim=data.d)
    except (RhoregError, OSError) as exc:
        _fail(str(exc))

    settings = _optimizer_settings(overrides)
    rho_cfg = _rho_config(overrides, seed)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    result: dict = {
        "estimator": estimator,
        "family": fam.name,
        "model": model.kind,
        "n": data.n,
        "seed": seed,
        "base_measure": fam.base_measure,
    }
    exit_code = 0
    try:
        if estimator == "rho":
            eta0 = scenario_initializer(data, fam, model, settings, rng)
            fit = rho_estimate(data, fam, model, eta0, rho_cfg, rng=rng)
            result.update(fit.to_dict())
        elif estimator == "mle":
            res = mle(data, fam, model)
            result.update(res.to_dict())
            if not res.exists:
                exit_code = 2
        elif estimator == "median":
            eta = median_estimate(data, fam, model, settings, rng)
            result["eta_hat"] = [float(v) for v in eta]
        else:
            _fail(f"unknown estimator '{estimator}'")
    except RhoregError as exc:
        _fail(str(exc))

    payload = json.dumps(result, indent=2, sort_keys=True)
    if out_path:
        Path(out_path).write_text(payload + "\n")
    else:
        click.echo(payload)
    sys.exit(exit_code)


def _format_cell(value) -> str:
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


@main.command("simulate")
@click.argument("config_path", type=click.Path())
def cmd_simulate(config_path):
    """Run the Monte-Carlo benchmark described by a config file.

    Writes one JSON report per (scenario, estimator) pair plus an aggregate
    CSV; partial failures are recorded per pair.
    """
    try:
        cfg = load_config(config_path)
    except RhoregError as exc:
        _fail(str(exc))
    out_dir = Path(cfg.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        _fail(f"cannot create output directory: {exc}")

    rows = []
    for sid in cfg.scenarios:
        scen = build_scenario(
            sid,
            n=cfg.overrides.get("n"),
            replications=cfg.replications,
            quadrature_n=cfg.quadrature_n,
            holder_alpha=cfg.overrides.get("holder_alpha", 1.0),
            holder_M=cfg.overrides.get("holder_M", 1.0),
        )
        rho_cfg = _rho_config(cfg.overrides, cfg.master_seed)
        reports = {}
        estimators = list(cfg.estimators)
        if "rho" in estimators:  # benchmark first
            estimators.sort(key=lambda e: e != "rho")
        for est in estimators:
            if est == "median" and scen.family.name not in ("poisson", "exponential"):
                click.echo(f"note: skipping {sid}/median (unsupported family)", err=True)
                continue
            benchmark = reports["rho"].r_n if "rho" in reports and est != "rho" else None
            report = risk_mc(
                scen,
                est,
                reps=cfg.replications,
                seed=cfg.master_seed,
                rho_cfg=rho_cfg,
                opt_settings=rho_cfg.sup_search,
                n_jobs=cfg.parallelism,
                benchmark_risk=benchmark,
            )
            if isinstance(scen.corruption, ContaminationSpec):
                report.metadata["mixture_approximation_error"] = (
                    mixture_approximation_error(scen, cfg.master_seed)
                )
            reports[est] = report
            path = out_dir / f"{sid}__{est}.json"
            path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
            q1, med, q3, mx = report.iter_quartiles
            rows.append([
                sid, est, report.r_n, report.mc_std_error,
                report.excess_vs.get("rho", ""), q1, med, q3, mx,
                round(report.mean_seconds, 6), report.failures,
            ])
            click.echo(
                f"{sid:22s} {est:7s} R_n={report.r_n:.6g} "
                f"se={report.mc_std_error:.2g} failures={report.failures}"
            )

    agg = out_dir / "aggregate.csv"
    with agg.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])
    click.echo(f"wrote {agg}")
    sys.exit(0)


def _fmt_risk(value: float) -> str:
    return f"{value:.4f}"


def _fmt_excess(value) -> str:
    if value == "" or value is None:
        return "-"
    v = float(value)
    return f"{100.0 * v:+.2g}%"


@main.command("table")
@click.argument("report_dir", type=click.Path())
def cmd_table(report_dir):
    """Render stored reports as aligned text tables."""
    agg = Path(report_dir) / "aggregate.csv"
    if not agg.exists():
        _fail(f"no aggregate.csv under {report_dir}")
    with agg.open() as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        _fail(f"{agg} holds no report rows")

    scenarios = []
    by_pair = {}
    for row in rows:
        key = (row["scenario"], row["estimator"])
        by_pair[key] = row
        if row["scenario"] not in scenarios:
            scenarios.append(row["scenario"])

    header = f"{'scenario':<22} {'R_n(rho)':>10} {'E(MLE)':>10} {'E(median)':>10}"
    click.echo(header)
    click.echo("-" * len(header))
    for sid in scenarios:
        rho_row = by_pair.get((sid, "rho"))
        mle_row = by_pair.get((sid, "mle"))
        med_row = by_pair.get((sid, "median"))
        r_n = _fmt_risk(float(rho_row["R_n"])) if rho_row else "-"
        e_mle = _fmt_excess(mle_row["excess_vs_rho"]) if mle_row else "-"
        e_med = _fmt_excess(med_row["excess_vs_rho"]) if med_row else "-"
        click.echo(f"{sid:<22} {r_n:>10} {e_mle:>10} {e_med:>10}")

    click.echo("")
    header2 = f"{'scenario':<22} {'iterQ1':>7} {'iterMed':>8} {'iterQ3':>7} {'iterMax':>8} {'failures(MLE)':>14}"
    click.echo(header2)
    click.echo("-" * len(header2))
    for sid in scenarios:
        rho_row = by_pair.get((sid, "rho"))
        mle_row = by_pair.get((sid, "mle"))
        if not rho_row:
            continue
        fails = mle_row["failures"] if mle_row else "-"
        click.echo(
            f"{sid:<22} {float(rho_row['iterQ1']):>7.3g} {float(rho_row['iterMed']):>8.3g} "
            f"{float(rho_row['iterQ3']):>7.3g} {float(rho_row['iterMax']):>8.3g} {fails:>14}"
        )
    sys.exit(0)


if __name__ == "__main__":
    main()
