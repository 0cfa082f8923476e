"""Command-line entry point: ``hdtzeno <subcommand> [--config PATH | --preset NAME] ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiment
from .experiment import ConfigError
from .hamiltonian import build
from .protocol import ResourceLimitError, revival_curve
from .spin_hilbert import zero_state

EXIT_CONFIG = 2
EXIT_RESOURCE = 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="INI experiment config")
    p.add_argument("--preset", choices=sorted(experiment.PRESETS), help="named figure preset")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--method", choices=sorted(experiment.METHODS))
    p.add_argument("--samples", type=int, help="trajectory count M for sampling")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdtzeno", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("run", "simulate the sweep and write rows.csv / summary.json"),
        ("theory", "write theory curves and thresholds without simulating"),
        ("validate", "print feasibility diagnostics for a config"),
        ("revival", "write the return-probability curve revival.csv"),
        ("classify", "print the Zeno exponent, integrability and c_H constants"),
        ("check-derivation", "compare short-step dynamics with the split-operator and perturbative forms"),
    ]:
        _common(sub.add_parser(name, help=help_text))
    return parser


def _load(args) -> experiment.ExperimentConfig:
    return experiment.load_config(
        args.config,
        args.preset,
        seed=args.seed,
        output_dir=args.out,
        method=args.method,
        M=args.samples,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "run":
            summary = experiment.run(cfg)
            print(f"wrote {cfg.output_dir}/rows.csv and summary.json in {summary['wall_time_s']:.1f}s")
        elif args.command == "theory":
            experiment.theory_only(cfg)
            print(f"wrote {cfg.output_dir}/theory.csv and summary.json")
        elif args.command == "validate":
            notes = experiment.validate(cfg)
            for note in notes:
                print(note)
            if not notes:
                print("ok")
        elif args.command == "revival":
            Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
            hs = build(cfg.hamiltonian)
            times = np.linspace(0.0, cfg.revival_t_max, cfg.revival_points)
            rc = revival_curve(hs, zero_state(cfg.partition.n_total), times)
            experiment.write_table(Path(cfg.output_dir) / "revival.csv", ["t", "xi"], rc.rows())
            print(f"first revival at t = {rc.first_revival_time}")
        elif args.command == "classify":
            hs = build(cfg.hamiltonian)
            consts = experiment.zeno_constants(hs, cfg.K_list, cfg.T)
            print(json.dumps(experiment.classification(cfg, consts), indent=2))
        elif args.command == "check-derivation":
            Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
            rep = experiment.derivation_report(cfg)
            experiment.write_table(
                Path(cfg.output_dir) / "derivation.csv",
                ["dt", "trotter_err", "pm_exact", "pm_perturbative"],
                rep.rows(),
            )
            print(f"alpha={rep.alpha} trotter exponent={rep.trotter_exponent:.3f} "
                  f"P_m exponent={rep.pm_exponent:.3f}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}\nrerun with --method sample", file=sys.stderr)
        return EXIT_RESOURCE
    return 0


if __name__ == "__main__":
    sys.exit(main())
