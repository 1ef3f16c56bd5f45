"""Command-line entry point: ``spatialkf run|sensitivity|multiyear|render``.

Every RunConfig field is available as ``--field-name``; flags override the
``--config`` file. Exit codes: 0 success, 1 config error, 2 data error,
3 numerical failure.
"""

import argparse
import logging
import sys

from . import pipeline
from .config import FIELD_NAMES, load_config
from .exceptions import ConfigError, DataError, NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("spatialkf")


def _exit_code(exc):
    cause = getattr(exc, "cause", exc)
    if isinstance(cause, ConfigError):
        return EXIT_CONFIG
    if isinstance(cause, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(cause, (DataError, OSError, ValueError)):
        return EXIT_DATA
    return EXIT_DATA


def build_parser():
    parser = argparse.ArgumentParser(prog="spatialkf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "run": "filter, assess and render one dataset",
        "sensitivity": "rerun across observation-noise scales",
        "multiyear": "compare training on fewer years",
        "render": "re-render figures from saved assessments",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="flat key = value config file")
        for field in FIELD_NAMES:
            p.add_argument("--" + field.replace("_", "-"), dest=field, default=None, metavar=field.upper())
        if name == "sensitivity":
            p.add_argument("--scales", default=None, help="comma-separated observation scales")
        if name == "multiyear":
            p.add_argument("--all-years", action="store_true", help="emit comparisons for every predicted year")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {f: getattr(args, f) for f in FIELD_NAMES}
    if getattr(args, "scales", None) is not None:
        overrides["sensitivity_scales"] = args.scales
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "render":
            cfg.validate(check_paths=False)
            paths = pipeline.cmd_render(cfg)
            print(f"rendered {len(paths)} files into {cfg.output_dir}")
        else:
            cfg.validate()
            if args.command == "run":
                for a in pipeline.cmd_run(cfg):
                    print(
                        f"{cfg.kind.value} {a.year}: avg general accuracy {a.avg_general_accuracy:.4%}, "
                        f"hotspot accuracy {a.hotspot_accuracy:.4%}, avg error {a.avg_error:.4g}, max error {a.max_error:.4g}"
                    )
            elif args.command == "sensitivity":
                for r in pipeline.cmd_sensitivity(cfg):
                    print(f"r={r.observation_scale:g} {r.year}: avg general accuracy {r.avg_general_acc:.4%}, hotspot accuracy {r.hotspot_acc:.4%}")
            elif args.command == "multiyear":
                for r in pipeline.cmd_multiyear(cfg, all_years=args.all_years):
                    print(f"trained {r.train_count} year(s), {r.year}: max error {r.max_error:.4g}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except pipeline.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
