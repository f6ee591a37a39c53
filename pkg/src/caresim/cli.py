"""Command-line entry points: train, eval, replay, analyze, table, serve.

Exit codes: 0 success, 2 validation problem (bad arguments, schemas, missing
cells), 3 integrity mismatch (replay divergence or stale config hash).
"""
from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np

from .configs import PROFILES, TASKS, ConfigError, load_env_config
from .envs import EnvError
from .harness import ConfigHashMismatch, evaluate, replay
from .policy import ObsDimMismatch, PolicyError, load_policy, save_policy
from .ppo import NonFiniteLoss, TrainConfig, train as train_policy
from .records import (
    MissingCell,
    SchemaError,
    load_episodes,
    load_metrics_csv,
    make_table,
    save_metrics_csv,
    write_episodes,
)
from .stats import wilcoxon_signed_rank

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_MISMATCH = 3

_VALIDATION_ERRORS = (SchemaError, ConfigError, PolicyError, ObsDimMismatch,
                      EnvError, MissingCell, NonFiniteLoss, ValueError, OSError)


@click.group()
def main() -> None:
    """Assistive-robot simulation lab."""


@main.command()
@click.option("--task", type=click.Choice(TASKS), required=True)
@click.option("--robot", type=click.Choice(PROFILES), default="armA", show_default=True)
@click.option("--biomech", type=click.Choice(["fixed", "randomized"]), default="fixed",
              show_default=True)
@click.option("--rollouts", type=int, default=500, show_default=True,
              help="Total training rollouts.")
@click.option("--per-iteration", type=int, default=20, show_default=True,
              help="Rollouts collected per update.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--out", type=click.Path(dir_okay=False), required=True,
              help="Policy JSON output path.")
@click.option("--checkpoint-dir", type=click.Path(file_okay=False), default=None)
@click.option("--curve", type=click.Path(dir_okay=False), default=None,
              help="Write the per-iteration learning curve as CSV.")
def train(task, robot, biomech, rollouts, per_iteration, seed, out, checkpoint_dir, curve):
    """Train a policy with PPO on static sampled humans."""
    try:
        cfg = TrainConfig(task=task, robot_profile=robot, biomech_mode=biomech,
                          total_rollouts=rollouts, rollouts_per_iteration=per_iteration,
                          seed=seed)
        result = train_policy(
            cfg, checkpoint_dir=checkpoint_dir,
            progress=lambda e: click.echo(
                f"iter {e['iteration']:4d}  reward {e['mean_reward']:9.2f}  "
                f"success {e['success_rate']:.2f}"))
        save_policy(out, result.policy)
        if curve:
            _write_curve(curve, result.curve)
        click.echo(f"saved policy {result.policy.policy_id} to {out}")
    except _VALIDATION_ERRORS as exc:
        _fail(exc, EXIT_VALIDATION)


def _write_curve(path, entries: list[dict]) -> None:
    if not entries:
        return
    fields = list(entries[0])
    parent = Path(path).parent
    if parent != Path("."):
        parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=fields)
        w.writeheader()
        w.writerows(entries)


@main.command("eval")
@click.option("--policy", "policy_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--episodes", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--report", type=click.Path(dir_okay=False), default=None,
              help="Append the metrics row to this CSV.")
@click.option("--robot", type=click.Choice(PROFILES), default=None,
              help="Defaults to the profile the policy was trained with.")
@click.option("--biomech", type=click.Choice(["fixed", "randomized"]), default="fixed",
              show_default=True)
@click.option("--record", "record_path", type=click.Path(dir_okay=False), default=None,
              help="Write all episode records to this JSONL file.")
@click.option("--deterministic", is_flag=True,
              help="Use the policy mean action instead of sampling.")
def eval_cmd(policy_path, episodes, seed, report, robot, biomech, record_path, deterministic):
    """Evaluate a policy over seeded episodes and aggregate reward/success."""
    try:
        policy = load_policy(policy_path)
        profile = robot or policy.meta.get("robot_profile", "armA")
        row, records = evaluate(policy, profile, episodes, seed,
                                biomech_mode=biomech, stochastic=not deterministic)
        click.echo(f"{row.task} / {profile} / {row.policy_id}: "
                   f"mean reward {row.mean_reward:.3f}, "
                   f"success {row.success_rate * 100.0:.1f}% over {row.episodes} episodes")
        if report:
            save_metrics_csv(report, [row], append=True)
        if record_path:
            write_episodes(record_path, records)
    except _VALIDATION_ERRORS as exc:
        _fail(exc, EXIT_VALIDATION)


@main.command("replay")
@click.argument("record_file", type=click.Path(exists=True, dir_okay=False))
def replay_cmd(record_file):
    """Re-simulate recorded episodes and verify them bit for bit."""
    try:
        records = load_episodes(record_file)
    except SchemaError as exc:
        _fail(exc, EXIT_VALIDATION)
    failures = 0
    for i, rec in enumerate(records):
        try:
            report = replay(rec)
        except ConfigHashMismatch as exc:
            click.echo(f"episode {i}: {exc}")
            sys.exit(EXIT_MISMATCH)
        if report.ok:
            click.echo(f"episode {i}: clean replay")
        else:
            failures += 1
            where = "footer" if report.divergence_step is None else f"step {report.divergence_step}"
            click.echo(f"episode {i}: DIVERGED at {where} ({report.field}): {report.message}")
    if failures:
        sys.exit(EXIT_MISMATCH)


@main.command()
@click.option("--a", "a_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--b", "b_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--b-const", type=float, default=None,
              help="Compare column A against a constant (e.g. the neutral response 4).")
@click.option("--value-col", default="mean_reward", show_default=True)
@click.option("--paired-col", default=None,
              help="Key column used to align rows between the two files; "
                   "row order pairs them otherwise.")
@click.option("--one-sided", is_flag=True,
              help="Report the one-sided p for the observed direction.")
def analyze(a_path, b_path, b_const, value_col, paired_col, one_sided):
    """Wilcoxon signed-rank test between two metrics CSVs (or vs a constant)."""
    try:
        a = _read_column(a_path, value_col, paired_col)
        if b_path is None and b_const is None:
            raise ValueError("provide either --b or --b-const")
        if b_path is not None:
            b = _read_column(b_path, value_col, paired_col)
            if paired_col:
                keys = sorted(set(a) & set(b))
                missing = set(a) ^ set(b)
                if missing:
                    click.echo(f"note: {len(missing)} unpaired keys dropped")
                a_vals = [a[k] for k in keys]
                b_vals = [b[k] for k in keys]
            else:
                a_vals, b_vals = list(a), list(b)
                if len(a_vals) != len(b_vals):
                    raise ValueError("row counts differ; use --paired-col to align")
        else:
            a_vals = [a[k] for k in sorted(a)] if paired_col else list(a)
            b_vals = float(b_const)

        alternative = "two-sided"
        if one_sided:
            diffs = np.asarray(a_vals, dtype=float) - (
                np.asarray(b_vals, dtype=float) if not np.isscalar(b_vals) else b_vals)
            alternative = "less" if float(np.median(diffs)) < 0.0 else "greater"
        res = wilcoxon_signed_rank(a_vals, b_vals, alternative=alternative)
        click.echo(json.dumps({
            "n": res.n, "W": res.W, "w_plus": res.w_plus, "w_minus": res.w_minus,
            "p_value": res.p_value, "method": res.method,
            "alternative": res.alternative, "all_zero": res.all_zero,
        }))
    except _VALIDATION_ERRORS as exc:
        _fail(exc, EXIT_VALIDATION)


def _read_column(path, value_col: str, paired_col: str | None):
    """Column values from a CSV; a dict keyed by paired_col when given."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if value_col not in (reader.fieldnames or ()):
            raise ValueError(f"{path}: no column {value_col!r}")
        if paired_col and paired_col not in reader.fieldnames:
            raise ValueError(f"{path}: no column {paired_col!r}")
        if paired_col:
            return {rec[paired_col]: float(rec[value_col]) for rec in reader}
        return [float(rec[value_col]) for rec in reader]


@main.command()
@click.option("--in", "in_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--layout", type=click.Choice(["original-vs-sim", "original-vs-revised"]),
              default="original-vs-revised", show_default=True)
@click.option("-o", "--out", type=click.Path(dir_okay=False), default=None,
              help="Also write the table as CSV.")
def table(in_dir, layout, out):
    """Aggregate metrics CSVs in a directory into a results table."""
    try:
        rows = []
        files = sorted(Path(in_dir).glob("*.csv"))
        if not files:
            raise ValueError(f"no CSV files in {in_dir}")
        for f in files:
            rows.extend(load_metrics_csv(f))
        tbl = make_table(rows, layout)
        click.echo(tbl.to_text(), nl=False)
        if out:
            tbl.to_csv(out)
    except _VALIDATION_ERRORS as exc:
        _fail(exc, EXIT_VALIDATION)


@main.command()
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--policies", "policies_dir", type=click.Path(file_okay=False), required=True)
@click.option("--record", "record_dir", type=click.Path(file_okay=False), default=None)
@click.option("--ui", "ui_dir", type=click.Path(file_okay=False), default=None,
              help="Static UI bundle directory (defaults to ./frontend/dist if present).")
@click.option("--tick-interval", type=float, default=0.1, show_default=True)
@click.option("--stochastic", is_flag=True, help="Sample policy actions instead of the mean.")
def serve(port, host, policies_dir, record_dir, ui_dir, tick_interval, stochastic):
    """Run the live session server."""
    try:
        import uvicorn

        from .server import create_app

        if ui_dir is None and Path("frontend/dist").is_dir():
            ui_dir = "frontend/dist"
        app = create_app(policies=policies_dir, record_dir=record_dir,
                         env_cfg=load_env_config(), tick_interval=tick_interval,
                         static_dir=ui_dir, stochastic=stochastic)
        uvicorn.run(app, host=host, port=port)
    except _VALIDATION_ERRORS as exc:
        _fail(exc, EXIT_VALIDATION)


def _fail(exc: Exception, code: int) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


if __name__ == "__main__":
    main()
