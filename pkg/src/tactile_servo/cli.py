"""Command line entry point: ``tactile-servo <subcommand> --config <file>``.

Exit codes: 0 success, 2 config or input error, 3 training divergence,
4 acceptance failure in ``repro-all``.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from . import experiments as ex
from .config import ConfigError
from .embedding import TrainingDivergence

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_ACCEPTANCE = 0, 2, 3, 4

STAGES = {
    "gen-data": (ex.gen_data, "simulate the demonstration campaign into <run_dir>/demos"),
    "prep-data": (ex.prep_data, "filter, segment and resample demos; build geodesic bins"),
    "train-ae": (ex.train_ae, "train the LatStruct and noLatStruct autoencoders"),
    "train-dyn": (ex.train_dyn, "train the dynamics models for every ablation and seed"),
    "eval-ae": (ex.eval_ae, "reconstruction and MDS report plus the latent embedding"),
    "eval-fd": (ex.eval_fd, "chained forward-dynamics ablation report"),
    "eval-id": (ex.eval_id, "inverse-dynamics ablation report"),
    "servo": (ex.servo_all, "closed-loop servoing runs in simulation"),
    "repro-all": (ex.repro_all, "run every stage and check the acceptance criteria"),
}


def build_parser():
    p = argparse.ArgumentParser(prog="tactile-servo", description="Latent-space tactile servoing pipeline.",
                                epilog="exit codes: 0 ok, 2 config or input error, 3 training divergence, "
                                       "4 acceptance failure (repro-all)")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="subcommand")
    for name, (_, help_text) in STAGES.items():
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.add_argument("--config", required=name != "repro-all",
                        help="key = value config file" + (" (optional; defaults otherwise)" if name == "repro-all"
                                                          else ""))
        sp.add_argument("--run-dir", help="override run_dir")
        sp.add_argument("--seed", type=int, help="override seed")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
        sp.add_argument("-v", "--verbose", action="store_true", help="log progress")
        if name == "train-ae":
            sp.add_argument("--data", help="dataset directory (default <run_dir>/data)")
            sp.add_argument("--out", help="checkpoint directory (default <run_dir>/models)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    overrides = list(args.set)
    if args.run_dir is not None:
        overrides.append(f"run_dir={args.run_dir}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    fn = STAGES[args.command][0]
    try:
        cfg = ex.load_config(args.config, overrides)
        run = ex.Run(cfg, data=getattr(args, "data", None), models=getattr(args, "out", None))
        result = fn(run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergence as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    if args.command == "repro-all":
        for r in result:
            print(r.line())
        if not all(r.passed for r in result):
            return EXIT_ACCEPTANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
