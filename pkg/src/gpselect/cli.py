import argparse
import logging
import sys

from .harness import ConfigError, compare, load_config, run


def build_parser():
    parser = argparse.ArgumentParser(prog="gpselect", description="GP-Select experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the policies in a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="set a config field, dotted keys for nested sections (repeatable)")
    p_run.add_argument("--lazy", choices=["on", "off", "both"])
    p_run.add_argument("--out", help="output directory (same as --override output=...)")

    p_cmp = sub.add_parser("compare", help="value/diversity table across run directories")
    p_cmp.add_argument("--inputs", nargs="+", required=True)
    p_cmp.add_argument("--out", required=True)

    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            overrides = list(args.override)
            if args.lazy:
                overrides.append(f"lazy={args.lazy}")
            if args.out:
                overrides.append(f"output={args.out}")
            out = run(load_config(args.config, overrides))
            print(out)
        else:
            for row in compare(args.inputs, args.out):
                print(row["policy"], row["lambda"], row["value"], row["diversity"], sep="\t")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
