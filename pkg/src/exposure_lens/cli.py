"""Command-line interface.

Every subcommand that writes files also writes a run manifest beside its
primary output (``<name>.manifest.json``) recording the command line,
input/output digests, and the seed, so any numeric output can be
reproduced and checked byte for byte. Exit codes: 0 success, 2 validation
error, 3 numerical failure.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import sys
from pathlib import Path

import click

from . import diagnostics as diag
from . import identify, plots, regression, selection, simulate, tables
from .errors import NumericalError, ValidationError
from .exposure import (
    ROLE_STANDARDIZED,
    ExposureVector,
    composite,
    exposure_csv,
    load_exposure,
    platform_proxy,
    reweight,
    standardize,
    true_exposure,
)
from .manifest import build_manifest, write_manifest
from .regression import DID_TERM, FitSummary, FixedEffectSpec
from .rng import default_seed
from .soc import OccId
from .tables import (
    OccOutcomeTable,
    load_crosswalk,
    load_outcome_table,
    load_share_table,
    load_task_matrix,
    write_text,
)


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except NumericalError as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(3)

    return wrapper


def _emit(path: str, text: str, command: list[str], inputs: list[str], seed: int | None,
          config_text: str = "", extra_outputs: list[str] | None = None) -> None:
    write_text(path, text)
    outputs = [path, *(extra_outputs or [])]
    manifest = build_manifest(command, inputs, outputs, seed, config_text)
    write_manifest(manifest, path)


def _command_line() -> list[str]:
    """Canonical command line for the manifest, rebuilt from the click
    context so it is identical however the process was started."""
    ctx = click.get_current_context(silent=True)
    if ctx is None or ctx.command is None:
        return ["exposure-lens", *sys.argv[1:]]
    argv = ["exposure-lens", *ctx.command_path.split()[1:]]
    for param in ctx.command.params:
        if not isinstance(param, click.Option):
            continue
        value = ctx.params.get(param.name)
        if value is None or value is False:
            continue
        flag = param.opts[0]
        if param.is_flag:
            argv.append(flag)
        else:
            argv.extend([flag, str(value)])
    return argv


@click.group()
@click.version_option()
def main() -> None:
    """Occupation-level AI-exposure measurement and diagnostics."""


# ---------------------------------------------------------------------------
# ingest


@main.command()
@click.option("--kind", type=click.Choice(["share", "task", "outcome", "crosswalk"]), required=True)
@click.option("--path", "path", required=True, type=click.Path())
@click.option("--percent", is_flag=True, help="Input shares are percentages; divide by 100.")
@click.option("--normalize", is_flag=True, help="Rescale raw shares whose sum is off by more than 1e-6.")
@click.option("--label", default=None, help="Source label recorded on the table.")
@click.option("--out", default=None, type=click.Path(), help="Write the validated table in canonical form.")
@_handle_errors
def ingest(kind, path, percent, normalize, label, out):
    """Validate (and optionally canonicalize) an input table."""
    label = label or Path(path).stem
    if kind == "share":
        table = load_share_table(path, label, percent=percent, normalize=normalize)
        text = tables.share_table_csv(table)
        click.echo(f"share table {label!r}: {len(table.entries)} occupations at {table.level} level")
    elif kind == "task":
        matrix = load_task_matrix(path, label, normalize=normalize)
        text = tables.task_matrix_csv(matrix)
        n_rows = sum(len(b.task_ids) for b in matrix.bundles.values())
        click.echo(f"task matrix {label!r}: {len(matrix.bundles)} occupations, {n_rows} rows")
    elif kind == "outcome":
        table = load_outcome_table(path, label)
        text = tables.outcome_table_csv(table)
        click.echo(f"outcome table {label!r}: {len(table.values)} occupations")
    else:
        xw = load_crosswalk(path)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["source_code", "target_code", "weight"])
        for source, targets in sorted(xw.entries.items()):
            for occ, w in targets:
                writer.writerow([source, occ.code, tables._fmt(w)])
        text = buf.getvalue()
        click.echo(f"crosswalk: {len(xw.entries)} source codes")
    if out:
        _emit(out, text, _command_line(), [path], None)


# ---------------------------------------------------------------------------
# psi


def psi_csv(profile: selection.SelectionProfile) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["occ_code", "psi", "flag"])
    for occ in profile.occupations():
        writer.writerow([occ.code, tables._fmt(profile.psi[occ]), profile.flags.get(occ, "")])
    for occ in sorted(profile.excluded):
        writer.writerow([occ.code, "", profile.excluded[occ]])
    return buf.getvalue()


def load_psi(path) -> selection.SelectionProfile:
    rows = tables._read_rows(path, ("occ_code", "psi", "flag"))
    psi, excluded, flags = {}, {}, {}
    for row in rows:
        occ = OccId(row["occ_code"])
        if row["psi"] == "":
            excluded[occ] = row["flag"]
            continue
        psi[occ] = float(row["psi"])
        if row["flag"]:
            flags[occ] = row["flag"]
    if not psi:
        raise ValidationError(f"{path}: no psi rows")
    return selection.SelectionProfile(psi=psi, excluded=excluded, flags=flags)


@main.command()
@click.option("--platform", required=True, type=click.Path())
@click.option("--workforce", required=True, type=click.Path())
@click.option("--weights", default=None, type=click.Path(), help="Outcome table with employment weights for weighted skew metrics.")
@click.option("--percent", is_flag=True)
@click.option("--normalize", is_flag=True)
@click.option("--out", required=True, type=click.Path())
@_handle_errors
def psi(platform, workforce, weights, percent, normalize, out):
    """Platform-to-workforce share ratios with skew metrics."""
    p = load_share_table(platform, Path(platform).stem, percent=percent, normalize=normalize)
    f = load_share_table(workforce, Path(workforce).stem, percent=percent, normalize=normalize)
    profile = selection.compute_psi(p, f)
    weight_table = load_outcome_table(weights, Path(weights).stem) if weights else None
    metrics = selection.skew_metrics(profile, weight_table)
    click.echo(
        f"psi for {len(profile.psi)} occupations; var={metrics.var_psi:.4g} "
        f"sd_log={metrics.sd_log_psi:.4g} max/min={metrics.max_min_ratio:.4g}"
    )
    inputs = [platform, workforce] + ([weights] if weights else [])
    _emit(out, psi_csv(profile), _command_line(), inputs, None)


# ---------------------------------------------------------------------------
# measure / reweight / standardize


@main.command()
@click.option("--tasks", required=True, type=click.Path())
@click.option("--platform", required=True, type=click.Path())
@click.option("--workforce", required=True, type=click.Path())
@click.option("--noise", type=float, default=0.0, show_default=True)
@click.option("--seed", type=int, default=None, help="Defaults to EXPOSURE_LENS_SEED.")
@click.option("--percent", is_flag=True)
@click.option("--normalize", is_flag=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--per-task-out", default=None, type=click.Path(), help="Also write the per-task-count variant.")
@click.option("--true-out", default=None, type=click.Path(), help="Also write true exposure from the task matrix.")
@_handle_errors
def measure(tasks, platform, workforce, noise, seed, percent, normalize, out, per_task_out, true_out):
    """Build the platform-weighted exposure measure."""
    seed = default_seed() if seed is None else seed
    matrix = load_task_matrix(tasks, Path(tasks).stem, normalize=normalize)
    p = load_share_table(platform, Path(platform).stem, percent=percent, normalize=normalize)
    f = load_share_table(workforce, Path(workforce).stem, percent=percent, normalize=normalize)
    inputs = [tasks, platform, workforce]
    extra = []
    if noise > 0:
        profile = selection.compute_psi(p, f)
        vector = platform_proxy(matrix, profile, noise_sd=noise, seed=seed)
    else:
        vector = composite(matrix, p, f)
    if per_task_out:
        per_task = composite(matrix, p, f, per_task=True)
        write_text(per_task_out, exposure_csv(per_task))
        extra.append(per_task_out)
    if true_out:
        write_text(true_out, exposure_csv(true_exposure(matrix)))
        extra.append(true_out)
    _emit(out, exposure_csv(vector), _command_line(), inputs, seed, extra_outputs=extra)
    click.echo(f"wrote {len(vector.values)} exposure scores (role {vector.role})")


@main.command("reweight")
@click.option("--proxy", required=True, type=click.Path())
@click.option("--psi", "psi_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@_handle_errors
def reweight_cmd(proxy, psi_path, out):
    """Divide a proxy by psi to remove between-occupation selection."""
    vector = load_exposure(proxy)
    profile = load_psi(psi_path)
    result = reweight(vector, profile)
    _emit(out, exposure_csv(result), _command_line(), [proxy, psi_path], None)
    click.echo(f"reweighted {len(result.values)} occupations")


@main.command("standardize")
@click.option("--exposure", "exposure_path", required=True, type=click.Path())
@click.option("--weights", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@_handle_errors
def standardize_cmd(exposure_path, weights, out):
    """Z-score an exposure vector under employment weights."""
    vector = load_exposure(exposure_path)
    weight_table = load_outcome_table(weights, Path(weights).stem)
    result = standardize(vector, weight_table)
    _emit(out, exposure_csv(result), _command_line(), [exposure_path, weights], None)
    click.echo(f"standardized {len(result.values)} occupations")


# ---------------------------------------------------------------------------
# simulate


@main.command("simulate")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--replicates", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@_handle_errors
def simulate_cmd(config_path, replicates, out_dir):
    """Draw synthetic cross sections or panels from a JSON config."""
    if not Path(config_path).exists():
        raise ValidationError(f"config file not found: {config_path}")
    config_text = Path(config_path).read_text(encoding="utf-8")
    try:
        raw = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{config_path}: invalid JSON ({exc})") from None
    cfg = simulate.DGPConfig.from_json_dict(raw)
    panel_spec = raw.get("panel")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for r in range(replicates):
        if panel_spec:
            panel = simulate.gen_panel(
                cfg,
                years=panel_spec["years"],
                n_states=int(panel_spec["n_states"]),
                persons_per_occ_year=int(panel_spec["persons_per_occ_year"]),
                post_years=panel_spec["post_years"],
                replicate=r,
                fe_sd=tuple(panel_spec.get("fe_sd", (0.05, 0.05, 0.05))),
                n_controls=int(panel_spec.get("n_controls", 2)),
                binary=bool(panel_spec.get("binary", False)),
            )
            path = out_dir / f"panel_{r:03d}.csv"
            write_text(path, simulate.panel_csv(panel))
        else:
            draw = simulate.gen_occ_cross_section(cfg, replicate=r)
            path = out_dir / f"cross_section_{r:03d}.csv"
            write_text(path, simulate.cross_section_csv(draw))
        outputs.append(str(path))
    manifest = build_manifest(_command_line(), [config_path], outputs, cfg.seed, config_text)
    write_manifest(manifest, out_dir / "run")
    click.echo(f"wrote {len(outputs)} replicate files to {out_dir}")


# ---------------------------------------------------------------------------
# did / eventstudy / xocc


def _fe_spec(fe: str) -> FixedEffectSpec:
    dims = tuple(d.strip() for d in fe.split(",") if d.strip())
    return FixedEffectSpec(dimensions=dims)


def _load_standardized(path) -> ExposureVector:
    vector = load_exposure(path)
    if vector.role != ROLE_STANDARDIZED:
        raise ValidationError(
            f"{path}: exposure role is {vector.role!r}; run `exposure-lens standardize` first"
        )
    return vector


@main.command("did")
@click.option("--panel", "panel_path", required=True, type=click.Path())
@click.option("--exposure", "exposure_path", required=True, type=click.Path())
@click.option("--post", required=True, help="Comma-separated post years, e.g. 2023,2024.")
@click.option("--fe", default="occ,state,year", show_default=True)
@click.option("--cluster", default="state", show_default=True)
@click.option("--out", required=True, type=click.Path())
@_handle_errors
def did_cmd(panel_path, exposure_path, post, fe, cluster, out):
    """Post-period interaction regression on a person-year panel."""
    panel = simulate.load_panel(panel_path)
    vector = _load_standardized(exposure_path)
    post_years = [int(y) for y in post.split(",") if y.strip()]
    fit = regression.did(
        panel.frame(), vector, post_years, _fe_spec(fe), cluster,
        controls=panel.control_names,
    )
    _emit(out, fit.to_json(DID_TERM), _command_line(), [panel_path, exposure_path], None)
    click.echo(
        f"coef x100 = {100 * fit.coefficient(DID_TERM):+.4f} "
        f"(se x100 {100 * fit.se_for(DID_TERM):.4f}, N={fit.nobs}, G={fit.n_clusters})"
    )


@main.command("eventstudy")
@click.option("--panel", "panel_path", required=True, type=click.Path())
@click.option("--exposure", "exposure_path", required=True, type=click.Path())
@click.option("--ref", type=int, required=True, help="Reference year (omitted interaction).")
@click.option("--fe", default="occ,state,year", show_default=True)
@click.option("--cluster", default="state", show_default=True)
@click.option("--out", required=True, type=click.Path())
@_handle_errors
def eventstudy_cmd(panel_path, exposure_path, ref, fe, cluster, out):
    """Year-by-exposure interactions with a pre-period Wald test."""
    panel = simulate.load_panel(panel_path)
    vector = _load_standardized(exposure_path)
    es = regression.event_study(
        panel.frame(), vector, ref, _fe_spec(fe), cluster,
        controls=panel.control_names,
    )
    payload = {
        "ref_year": es.ref_year,
        "years": [
            {"year": y, "coef": es.coefficient(y), "se": es.se_for(y)}
            for y in es.years
        ],
        "pre_f": es.pre_f,
        "pre_f_pvalue": es.pre_f_pvalue,
        "n": es.fit.nobs,
        "clusters": es.fit.n_clusters,
        "vcov_type": es.fit.vcov_type,
    }
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    _emit(out, text, _command_line(), [panel_path, exposure_path], None)
    click.echo(f"pre-period F = {es.pre_f:.3f} (p = {es.pre_f_pvalue:.3f})")


@main.command("xocc")
@click.option("--outcomes", required=True, type=click.Path())
@click.option("--exposure", "exposure_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@_handle_errors
def xocc_cmd(outcomes, exposure_path, out):
    """Occupation-level regression of an outcome on standardized exposure."""
    table = load_outcome_table(outcomes, Path(outcomes).stem)
    vector = load_exposure(exposure_path)
    fit = regression.cross_occ_regression(table, vector)
    _emit(out, fit.to_json(regression.XOCC_TERM), _command_line(), [outcomes, exposure_path], None)
    click.echo(
        f"slope x100 per SD = {100 * fit.coefficient(regression.XOCC_TERM):+.4f} "
        f"(se x100 {100 * fit.se_for(regression.XOCC_TERM):.4f}, N={fit.nobs})"
    )


# ---------------------------------------------------------------------------
# bounds / plim


@main.command("bounds")
@click.option("--baseline", required=True, type=click.Path())
@click.option("--reweighted", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@_handle_errors
def bounds_cmd(baseline, reweighted, out):
    """Identified set from a baseline/reweighted fit pair."""
    base = FitSummary.from_json(Path(baseline).read_text(encoding="utf-8"))
    rw = FitSummary.from_json(Path(reweighted).read_text(encoding="utf-8"))
    result = identify.bounds(base, rw)
    payload = {
        "low": result.low,
        "high": result.high,
        "width": result.width,
        "attenuation_share": result.attenuation_share,
        "baseline_coef": result.baseline_coef,
        "reweighted_coef": result.reweighted_coef,
        "signed_low": result.signed_low,
        "signed_high": result.signed_high,
    }
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    _emit(out, text, _command_line(), [baseline, reweighted], None)
    click.echo(
        f"|coef| in [{result.low:.4g}, {result.high:.4g}], width {result.width:.4g}, "
        f"attenuation {100 * result.attenuation_share:.1f}%"
    )


@main.command("plim")
@click.option("--beta", type=float, required=True)
@click.option("--lambda", "lambda_", type=float, required=True)
@click.option("--kappa", type=float, required=True, help="Signal-to-noise ratio; use 'inf' for none.")
@click.option("--out", default=None, type=click.Path())
@_handle_errors
def plim_cmd(beta, lambda_, kappa, out):
    """Closed-form large-sample coefficient under proxy selection."""
    value = identify.plim_from_values(beta, lambda_, kappa)
    click.echo(tables._fmt(value))
    if out:
        text = json.dumps(
            {"beta": beta, "lambda": lambda_, "kappa": kappa, "plim": value},
            sort_keys=True, indent=2,
        ) + "\n"
        _emit(out, text, _command_line(), [], None)


# ---------------------------------------------------------------------------
# diagnose


@main.group()
def diagnose() -> None:
    """Descriptive diagnostics over measures and share tables."""


def _load_measure(path: str):
    """Exposure CSV or share CSV, by header."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = fh.readline().strip()
    if header == "occ_code,value,role":
        return load_exposure(path)
    return load_share_table(path, Path(path).stem)


@diagnose.command("corr")
@click.option("--measures", required=True, help="Comma-separated measure CSVs.")
@click.option("--out", required=True, type=click.Path())
@click.option("--svg", default=None, type=click.Path())
@_handle_errors
def diagnose_corr(measures, out, svg):
    paths = [p.strip() for p in measures.split(",") if p.strip()]
    loaded = [_load_measure(p) for p in paths]
    labels = [Path(p).stem for p in paths]
    matrix, labels = diag.correlation_matrix(loaded, labels)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["measure", *labels])
    for i, label in enumerate(labels):
        writer.writerow([label, *(tables._fmt(v) for v in matrix[i])])
    extra = []
    if svg:
        plots.heatmap_svg(matrix, labels, svg)
        extra.append(svg)
    _emit(out, buf.getvalue(), _command_line(), paths, None, extra_outputs=extra)
    click.echo(f"correlation matrix over {len(labels)} measures")


@diagnose.command("transitions")
@click.option("--wave-a", required=True, type=click.Path())
@click.option("--wave-b", required=True, type=click.Path())
@click.option("--weights", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@_handle_errors
def diagnose_transitions(wave_a, wave_b, weights, out):
    a = _load_measure(wave_a)
    b = _load_measure(wave_b)
    w = load_outcome_table(weights, Path(weights).stem)
    tm = diag.quartile_transitions(a, b, w)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["from_quartile", "q1", "q2", "q3", "q4"])
    for i in range(4):
        writer.writerow([f"q{i + 1}", *(int(c) for c in tm.counts[i])])
    writer.writerow([])
    writer.writerow(["n_occupations", tm.n_occupations, "", "", ""])
    writer.writerow(["same_quartile", tables._fmt(tm.same_quartile), "", "", ""])
    writer.writerow(["one_move", tables._fmt(tm.one_move), "", "", ""])
    writer.writerow(["two_plus_move", tables._fmt(tm.two_plus_move), "", "", ""])
    _emit(out, buf.getvalue(), _command_line(), [wave_a, wave_b, weights], None)
    click.echo(
        f"same {100 * tm.same_quartile:.1f}% / one {100 * tm.one_move:.1f}% / "
        f"two+ {100 * tm.two_plus_move:.1f}%"
    )


@diagnose.command("l1")
@click.option("--wave-a", required=True, type=click.Path())
@click.option("--wave-b", required=True, type=click.Path())
@click.option("--level", default=None, type=click.Choice(["detailed", "major_group"]))
@click.option("--percent", is_flag=True)
@click.option("--normalize", is_flag=True)
@click.option("--out", required=True, type=click.Path())
@_handle_errors
def diagnose_l1(wave_a, wave_b, level, percent, normalize, out):
    a = load_share_table(wave_a, Path(wave_a).stem, percent=percent, normalize=normalize)
    b = load_share_table(wave_b, Path(wave_b).stem, percent=percent, normalize=normalize)
    value = diag.l1_shift(a, b, level)
    text = f"metric,value\nl1_shift_pp,{tables._fmt(value)}\n"
    _emit(out, text, _command_line(), [wave_a, wave_b], None)
    click.echo(f"L1 shift = {value:.2f} pp")


@diagnose.command("cv")
@click.option("--wave-a", required=True, type=click.Path())
@click.option("--wave-b", required=True, type=click.Path())
@click.option("--major", required=True, help="Two-digit major group, e.g. 15.")
@click.option("--percent", is_flag=True)
@click.option("--normalize", is_flag=True)
@click.option("--out", required=True, type=click.Path())
@_handle_errors
def diagnose_cv(wave_a, wave_b, major, percent, normalize, out):
    a = load_share_table(wave_a, Path(wave_a).stem, percent=percent, normalize=normalize)
    b = load_share_table(wave_b, Path(wave_b).stem, percent=percent, normalize=normalize)
    result = diag.growth_ratio_cv(a, b, major)
    text = (
        "metric,value\n"
        f"mean_ratio,{tables._fmt(result.mean_ratio)}\n"
        f"cv,{tables._fmt(result.cv)}\n"
        f"n_sub,{result.n_sub}\n"
    )
    _emit(out, text, _command_line(), [wave_a, wave_b], None)
    click.echo(f"mean ratio {result.mean_ratio:.3f}, CV {result.cv:.3f} over {result.n_sub} sub-occupations")


@diagnose.command("gap")
@click.option("--outcomes", required=True, help="Comma-separated outcome CSVs.")
@click.option("--ranking-a", required=True, type=click.Path())
@click.option("--ranking-b", required=True, type=click.Path())
@click.option("--reps", type=int, default=5000, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--q", type=float, default=0.10, show_default=True)
@click.option("--percent", is_flag=True)
@click.option("--normalize", is_flag=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--svg", default=None, type=click.Path())
@_handle_errors
def diagnose_gap(outcomes, ranking_a, ranking_b, reps, seed, alpha, q, percent, normalize, out, svg):
    seed = default_seed() if seed is None else seed
    paths = [p.strip() for p in outcomes.split(",") if p.strip()]
    outcome_tables = [load_outcome_table(p, Path(p).stem) for p in paths]
    a = load_share_table(ranking_a, Path(ranking_a).stem, percent=percent, normalize=normalize)
    b = load_share_table(ranking_b, Path(ranking_b).stem, percent=percent, normalize=normalize)
    result = diag.ranking_gap_test(
        outcome_tables, a, b, bootstrap_reps=reps, seed=seed, alpha=alpha, q=q
    )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["outcome", "rho_a", "rho_b", "delta", "ci_low", "ci_high", "p", "raw_reject", "holm_reject", "bh_reject"]
    )
    for i, r in enumerate(result.outcomes):
        writer.writerow(
            [
                r.label, tables._fmt(r.rho_a), tables._fmt(r.rho_b), tables._fmt(r.delta),
                tables._fmt(r.ci_low), tables._fmt(r.ci_high), tables._fmt(r.p_value),
                int(result.raw_reject[i]), int(result.holm_reject[i]), int(result.bh_reject[i]),
            ]
        )
    extra = []
    if svg:
        plots.forest_svg(result, svg)
        extra.append(svg)
    _emit(out, buf.getvalue(), _command_line(), [*paths, ranking_a, ranking_b], seed, extra_outputs=extra)
    n_raw = sum(result.raw_reject)
    n_holm = sum(result.holm_reject)
    click.echo(f"{n_raw} raw rejections at alpha={alpha}, {n_holm} under Holm")


# ---------------------------------------------------------------------------
# allocate


@main.command("allocate")
@click.option("--budget", type=float, required=True)
@click.option("--shares", required=True, type=click.Path())
@click.option("--compare-shares", default=None, type=click.Path())
@click.option("--selector", default=None, type=click.Path(), help="CSV occ_code,selected with 0/1 flags.")
@click.option("--percent", is_flag=True)
@click.option("--normalize", is_flag=True)
@click.option("--out", required=True, type=click.Path())
@_handle_errors
def allocate_cmd(budget, shares, compare_shares, selector, percent, normalize, out):
    """Split a budget by shares; optionally compare against a second rule."""
    table = load_share_table(shares, Path(shares).stem, percent=percent, normalize=normalize)
    alloc = diag.allocate(budget, table)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["occ_code", "allocation"])
    for occ in sorted(alloc):
        writer.writerow([occ.code, tables._fmt(alloc[occ])])
    inputs = [shares]
    if compare_shares:
        if not selector:
            raise ValidationError(
                "--compare-shares needs --selector (a CSV of occ_code,selected flags); "
                "the net shift over all occupations is zero by construction"
            )
        other_table = load_share_table(
            compare_shares, Path(compare_shares).stem, percent=percent, normalize=normalize
        )
        other = diag.allocate(budget, other_table)
        inputs.append(compare_shares)
        rows = tables._read_rows(selector, ("occ_code", "selected"))
        chosen = {OccId(r["occ_code"]) for r in rows if r["selected"].strip() == "1"}
        inputs.append(selector)
        shift = diag.compare_allocations(alloc, other, lambda o: o in chosen)
        writer.writerow([])
        writer.writerow(["shifted_amount", tables._fmt(shift.shifted_amount)])
        writer.writerow(["shifted_share", tables._fmt(shift.shifted_share)])
        click.echo(
            f"shift toward selected occupations: {shift.shifted_amount:,.0f} "
            f"({100 * shift.shifted_share:.1f}% of budget)"
        )
    _emit(out, buf.getvalue(), _command_line(), inputs, None)


# ---------------------------------------------------------------------------
# report


def _stars(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.10:
        return "*"
    return ""


@main.command("report")
@click.option("--fits", "fits_dir", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@_handle_errors
def report_cmd(fits_dir, out_dir):
    """Render fit JSONs into a coefficient table (coef x100, SE, stars)."""
    from scipy import stats as sp_stats

    fits_dir = Path(fits_dir)
    paths = sorted(p for p in fits_dir.glob("*.json") if not p.name.endswith("manifest.json"))
    if not paths:
        raise ValidationError(f"no fit JSON files under {fits_dir}")
    rows = []
    for path in paths:
        fit = FitSummary.from_json(path.read_text(encoding="utf-8"))
        t = fit.coef / fit.se if fit.se > 0 else float("inf")
        p = float(2.0 * sp_stats.t.sf(abs(t), max(fit.clusters - 1, 1)))
        rows.append((path.stem, fit, p))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["measure", "coef_x100", "se_x100", "stars", "n", "clusters"])
    for name, fit, p in rows:
        writer.writerow(
            [name, f"{100 * fit.coef:.4f}", f"{100 * fit.se:.4f}", _stars(p), fit.n, fit.clusters]
        )
    out_path = Path(out_dir) / "coefficients.csv"
    _emit(str(out_path), buf.getvalue(), _command_line(), [str(p) for p in paths], None)
    click.echo(f"wrote {out_path} ({len(rows)} measures)")


# ---------------------------------------------------------------------------
# pipeline


@main.command("pipeline")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@_handle_errors
def pipeline_cmd(config_path, out_dir):
    """Full synthetic baseline-vs-reweighted comparison.

    Stages: simulate panel, standardize the proxy and its reweighted
    version, fit both interaction designs, and emit the identified set
    with skew diagnostics. Every stage failure is reported with its
    stage label.
    """
    if not Path(config_path).exists():
        raise ValidationError(f"config file not found: {config_path}")
    config_text = Path(config_path).read_text(encoding="utf-8")
    try:
        raw = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{config_path}: invalid JSON ({exc})") from None

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs: list[str] = []

    def stage(label, fn):
        try:
            return fn()
        except (ValidationError, NumericalError) as exc:
            raise type(exc)(f"[stage {label}] {exc}") from None

    def run():
        cfg = simulate.DGPConfig.from_json_dict(raw)
        panel_spec = raw.get("panel")
        if not panel_spec:
            raise ValidationError("pipeline config needs a 'panel' section")
        panel = simulate.gen_panel(
            cfg,
            years=panel_spec["years"],
            n_states=int(panel_spec["n_states"]),
            persons_per_occ_year=int(panel_spec["persons_per_occ_year"]),
            post_years=panel_spec["post_years"],
            fe_sd=tuple(panel_spec.get("fe_sd", (0.05, 0.05, 0.05))),
            n_controls=int(panel_spec.get("n_controls", 2)),
            binary=bool(panel_spec.get("binary", False)),
        )
        return cfg, panel

    cfg, panel = stage("simulate", run)
    cross = panel.cross_section
    vectors = stage("measure", cross.exposure_vectors)

    # Employment weights: person mass per occupation.
    occ_codes = sorted(set(panel.occ.tolist()))
    weight_by_occ = {}
    for code in occ_codes:
        weight_by_occ[OccId(code)] = float(panel.weight[panel.occ == code].sum())
    weights = OccOutcomeTable("panel_weights", {o: 0.0 for o in weight_by_occ}, weight_by_occ)

    fe = _fe_spec(",".join(raw.get("fe", ["occ", "state", "year"])))
    cluster = raw.get("cluster", "state")
    post_years = [int(y) for y in raw["panel"]["post_years"]]

    def fit_one(vector):
        z = standardize(vector, weights)
        return regression.did(
            panel.frame(), z, post_years, fe, cluster, controls=panel.control_names
        )

    baseline_fit = stage("did-baseline", lambda: fit_one(vectors["proxy"]))
    reweighted_fit = stage("did-reweighted", lambda: fit_one(vectors["reweighted"]))

    base_path = out_dir / "baseline_fit.json"
    rw_path = out_dir / "reweighted_fit.json"
    write_text(base_path, baseline_fit.to_json(DID_TERM))
    write_text(rw_path, reweighted_fit.to_json(DID_TERM))
    outputs += [str(base_path), str(rw_path)]

    result = stage("bounds", lambda: identify.bounds(
        regression.summarize(baseline_fit, DID_TERM),
        regression.summarize(reweighted_fit, DID_TERM),
    ))
    metrics = stage("diagnose", lambda: selection.skew_metrics(cross.selection_profile()))
    payload = {
        "outcome": "outcome",
        "bounds": {
            "low": result.low,
            "high": result.high,
            "width": result.width,
            "attenuation_share": result.attenuation_share,
            "baseline_coef": result.baseline_coef,
            "reweighted_coef": result.reweighted_coef,
        },
        "skew": {
            "var_psi": metrics.var_psi,
            "sd_log_psi": metrics.sd_log_psi,
            "max_min_ratio": metrics.max_min_ratio,
        },
        "n": baseline_fit.nobs,
        "clusters": baseline_fit.n_clusters,
    }
    bounds_path = out_dir / "bounds.json"
    write_text(bounds_path, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    outputs.append(str(bounds_path))

    manifest = build_manifest(_command_line(), [config_path], outputs, cfg.seed, config_text)
    write_manifest(manifest, out_dir / "run")
    click.echo(
        f"bounds on |coef|: [{result.low:.4g}, {result.high:.4g}] "
        f"(attenuation {100 * result.attenuation_share:.1f}%)"
    )


if __name__ == "__main__":
    main()
