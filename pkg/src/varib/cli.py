"""Command-line entry point.

Verbs: gen-data, fit, sweep, report, probe, compare.  Exit codes: 0 on
success, 2 for config errors, 3 for numerical failures, 4 for I/O
failures.  Set VARIB_NUM_THREADS to cap the BLAS thread count (applied
before the numeric stack loads).
"""

import argparse
import json
import os
import sys


def _apply_thread_env():
    n = os.environ.get("VARIB_NUM_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, n)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="varib",
        description="Information-bottleneck experiments: data generation, "
        "fitting, sweeps, reports, probes, comparisons.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_config_flags(p):
        p.add_argument("--config", metavar="PATH", help="JSON experiment config")
        p.add_argument("--preset", metavar="NAME", help="named preset config")
        p.add_argument("--seed", type=int, metavar="U64", help="override config seed")
        p.add_argument("--out", metavar="DIR", required=True, help="output directory")

    p = sub.add_parser("gen-data", help="generate a dataset and write BMAT files")
    add_config_flags(p)

    p = sub.add_parser("fit", help="fit one model at the config gamma")
    add_config_flags(p)

    p = sub.add_parser("sweep", help="fit across the config gamma grid")
    add_config_flags(p)

    p = sub.add_parser("report", help="regenerate CSV/PGM reports for a finished run")
    p.add_argument("--run", metavar="DIR", required=True, help="run directory")

    p = sub.add_parser("probe", help="bar-segment probe of a fitted model")
    p.add_argument("--model", metavar="PATH", required=True, help="model.json path")
    p.add_argument("--config", metavar="PATH", required=True, help="probe spec JSON")
    p.add_argument("--out", metavar="DIR", required=True)

    p = sub.add_parser("compare", help="merge info curves of runs on shared data")
    p.add_argument("runs", nargs="+", metavar="RUN_DIR")
    p.add_argument("--out", metavar="DIR", required=True)

    p = sub.add_parser("presets", help="list available presets")
    return parser


def _load_config(args, experiments, ConfigError):
    if not args.preset and not args.config:
        raise ConfigError("need --preset and/or --config")
    cfg = experiments.preset_config(args.preset) if args.preset else {}
    if args.config:
        try:
            with open(args.config) as fh:
                override = json.load(fh)
        except OSError as err:
            raise ConfigError(f"cannot read config {args.config}: {err}")
        except json.JSONDecodeError as err:
            raise ConfigError(f"config {args.config} is not valid JSON: {err}")
        cfg = experiments.merge_config(cfg, override) if cfg else override
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def main(argv=None):
    _apply_thread_env()
    args = _build_parser().parse_args(argv)

    from . import experiments
    from .exceptions import ConfigError, MatrixFormatError, NumericalError
    from .matrixio import save_matrix

    try:
        if args.verb == "presets":
            for name in sorted(experiments.PRESETS):
                print(name)
            return 0

        if args.verb in ("gen-data", "fit", "sweep"):
            cfg = _load_config(args, experiments, ConfigError)

        if args.verb == "gen-data":
            cfg = experiments.validate_config(cfg)
            train, holdout, geometry = experiments.build_datasets(cfg)
            os.makedirs(args.out, exist_ok=True)
            save_matrix(os.path.join(args.out, "X.bmat"), train.X)
            save_matrix(os.path.join(args.out, "Y.bmat"), train.Y)
            if holdout is not None:
                save_matrix(os.path.join(args.out, "holdout_X.bmat"), holdout.X)
                save_matrix(os.path.join(args.out, "holdout_Y.bmat"), holdout.Y)
            print(f"wrote {train.n} training pairs to {args.out}")
            return 0

        if args.verb in ("fit", "sweep"):
            if args.verb == "sweep":
                probe_cfg = cfg.get("bottleneck", {})
                if not probe_cfg.get("gamma_grid"):
                    raise ConfigError(
                        "config.bottleneck.gamma_grid: sweep requires a gamma grid"
                    )
            else:
                cfg.setdefault("bottleneck", {}).pop("gamma_grid", None)
            manifest = experiments.run_experiment(cfg, args.out)
            print(f"run complete: {args.out} ({len(manifest['files'])} files)")
            return 0

        if args.verb == "report":
            manifest_path = os.path.join(args.run, "manifest.json")
            try:
                with open(manifest_path) as fh:
                    manifest = json.load(fh)
            except OSError as err:
                raise ConfigError(f"cannot read {manifest_path}: {err}")
            experiments.run_experiment(manifest["config"], args.run)
            print(f"reports regenerated in {args.run}")
            return 0

        if args.verb == "probe":
            try:
                with open(args.config) as fh:
                    probe_cfg = json.load(fh)
            except OSError as err:
                raise ConfigError(f"cannot read probe config: {err}")
            except json.JSONDecodeError as err:
                raise ConfigError(f"probe config is not valid JSON: {err}")
            stats = experiments.probe_reconstruction(args.model, probe_cfg, args.out)
            print(json.dumps(stats, indent=1, sort_keys=True))
            return 0

        if args.verb == "compare":
            path = experiments.compare_runs(args.runs, args.out)
            print(f"wrote {path}")
            return 0

        raise ConfigError(f"unknown verb {args.verb}")
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    except (MatrixFormatError, OSError) as err:
        print(f"I/O failure: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
