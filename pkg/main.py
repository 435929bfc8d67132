import argparse
import logging
import sys

from src.config import VERSION, setup_logging
from src.errors import EXIT_OK, SpectrumLabError, exit_code_for
from src.experiment_config import COMMANDS, apply_overrides, load_config
from src.experiments import (
    cmd_figure3,
    cmd_figure4,
    cmd_figure56,
    cmd_figure7,
    cmd_figure8,
    cmd_figure9,
    cmd_sweep,
    make_reporter,
)
from src.validation import cmd_validate

logger = logging.getLogger("PYL.Main")

HANDLERS = {
    "figure3": cmd_figure3,
    "figure4": cmd_figure4,
    "figure56": cmd_figure56,
    "figure7": cmd_figure7,
    "figure8": cmd_figure8,
    "figure9": cmd_figure9,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}

HELP = {
    "figure3": "N=2 throughput vs attack probability (myopic vs optimal softmax)",
    "figure4": "performance / robustness vs randomness (N=2)",
    "figure56": "myopic vs Boltzmann throughput for N=4 and N=10 (simulation)",
    "figure7": "four attack strategies on the table1 channels (simulation)",
    "figure8": "optimal Boltzmann temperature vs attack probability",
    "figure9": "attacker cost vs attack probability",
    "sweep": "generic alpha x policy x attacker simulation sweep",
    "validate": "closed-form / solver / Monte Carlo oracle cross-checks",
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML experiment file (default: builtin)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--replications", type=int, help="override sim.replications")
    common.add_argument("--no-plots", action="store_true", help="skip SVG rendering")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings only, no progress bars")

    parser = argparse.ArgumentParser(prog="main.py",
                                     description="Adversarial spectrum-learning simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HELP[name])
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    setup_logging(level)

    logger.info("==========================================")
    logger.info(f"🚀 Spectrum Lab {VERSION}: {args.command}")
    logger.info("==========================================")

    # ==========================================
    # Phase 1: 读取配置
    # ==========================================
    logger.info("--- Phase 1: Configuration ---")
    try:
        config = load_config(args.command, args.config)
        config = apply_overrides(config, seed=args.seed, out=args.out,
                                 replications=args.replications, no_plots=args.no_plots)
    except SpectrumLabError as e:
        logger.error(f"❌ Phase 1 Failed: {e}")
        return exit_code_for(e)
    logger.info(f"✅ Config [{config.experiment}] hash={config.config_hash} seed={config.seed}")
    logger.info(f"📂 Output Directory: {config.output_dir}")

    # ==========================================
    # Phase 2: 运行实验
    # ==========================================
    logger.info(f"--- Phase 2: {args.command} ---")
    try:
        reporter = make_reporter(config, args.command)
        HANDLERS[args.command](config, reporter)
    except SpectrumLabError as e:
        logger.error(f"❌ Phase 2 Failed: {e}")
        return exit_code_for(e)

    # ==========================================
    # 结束
    # ==========================================
    for path in reporter.written:
        print(path)
    logger.info(f"🎉 Done: {len(reporter.written)} file(s) written")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
