"""``ris-locate`` command line entry point."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Sequence

from . import harness
from .config import SUBCOMMANDS, ConfigError, RunConfig, load_config, parse_config

log = logging.getLogger("rislocate")

TRAJECTORY_HEADER = ["actual_x", "actual_y", "est_x", "est_y", "err_m"]
TRIALS_HEADER = [
    "trial", "variant", "snr_db", "n_ris", "actual_x", "actual_y", "est_x", "est_y",
    "err_m", "err_r1_m", "err_r2_m", "err_r3_m", "warnings",
]
SUMMARY_STATS = ["mean_m", "median_m", "p90_m", "trials"]
PAIRED_HEADER = ["snr_db", "proposed_median_m", "baseline_median_m", "trials"]


def fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_outputs(out_dir: Path, files: dict[str, str]) -> None:
    """Write every file to a temp name first, then rename them into place."""
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=out_dir)
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            staged.append((tmp, out_dir / name))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)


def trajectory_rows(points):
    for p in points:
        yield [*p.actual, *p.estimate, p.error]


def trial_rows(trials):
    for t in trials:
        yield [t.trial, t.variant, t.snr_db, t.n_ris, *t.actual, *t.estimate,
               t.position_error, *t.distance_errors, ";".join(t.warnings)]


def summary_rows(rows):
    for s in rows:
        yield [s.key, s.mean, s.median, s.p90, s.trials]


def run(cfg: RunConfig) -> dict[str, str]:
    """Run the selected experiment and return ``{filename: csv_text}``."""
    exp = cfg.experiment
    if cfg.subcommand == "noiseless":
        pts = harness.run_noiseless(exp.scene, cfg.trajectory, exp.sweep_points_per_element)
        for p in pts:
            if p.failure:
                log.warning("point %s failed: %s", p.actual, p.failure)
        return {"trajectory.csv": render_csv(TRAJECTORY_HEADER, trajectory_rows(pts))}
    if cfg.subcommand == "snr-sweep":
        summary, trials = harness.run_snr_sweep(exp)
        key = "snr_db"
    elif cfg.subcommand == "elements-sweep":
        summary, trials = harness.run_elements_sweep(exp)
        key = "n_ris"
    elif cfg.subcommand == "compare-baseline":
        paired, trials = harness.run_baseline_comparison(cfg.comparison)
        return {
            "summary.csv": render_csv(
                PAIRED_HEADER,
                ([r.snr_db, r.proposed_median, r.baseline_median, r.trials] for r in paired),
            ),
            "trials.csv": render_csv(TRIALS_HEADER, trial_rows(trials)),
        }
    else:
        raise ValueError(f"unknown subcommand {cfg.subcommand!r}")
    return {
        "summary.csv": render_csv([key, *SUMMARY_STATS], summary_rows(summary)),
        "trials.csv": render_csv(TRIALS_HEADER, trial_rows(trials)),
    }


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ris-locate",
        description="Simulate RIS-assisted MISO localization experiments and write CSV results.",
    )
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", type=Path, help="TOML configuration file")
    p.add_argument("--seed", type=int, help="master seed (overrides experiment.seed)")
    p.add_argument("--trials", type=int, help="trials per grid point")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    over = {}
    if args.seed is not None:
        over["master_seed"] = args.seed
    if args.trials is not None:
        over["trials"] = args.trials
    if args.workers is not None:
        over["workers"] = args.workers
    return replace(
        cfg,
        experiment=replace(cfg.experiment, **over),
        comparison=replace(cfg.comparison, **over),
        subcommand=args.subcommand,
        out_dir=args.out,
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else parse_config("")
        cfg = _apply_overrides(cfg, args)
        files = run(cfg)
        write_outputs(cfg.out_dir, files)
    except ConfigError as exc:
        print(f"ris-locate: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"ris-locate: error: {exc}", file=sys.stderr)
        return 1
    for name in files:
        log.info("wrote %s", cfg.out_dir / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
