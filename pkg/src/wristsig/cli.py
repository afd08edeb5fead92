"""``wristsig`` command-line entry point.

Exit codes: 0 success (or GENUINE), 1 FORGED, 2 usage error, 3 data error,
4 internal error.

Every flag can also come from a JSON config file (``--config``; top-level keys
apply to all subcommands, a section named after the subcommand overrides
them) or from ``WRISTSIG_<FLAG>`` environment variables. Precedence is
command line > environment > config file > built-in default.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .errors import WristSigError

EXIT_OK, EXIT_FORGED, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3, 4
ENV_PREFIX = "WRISTSIG_"

log = logging.getLogger("wristsig")

_CLASSIFIER_ALIASES = {
    "logistic": "logistic",
    "lr": "logistic",
    "nb": "gaussian_nb",
    "naive_bayes": "gaussian_nb",
    "gaussian_nb": "gaussian_nb",
    "forest": "random_forest",
    "rf": "random_forest",
    "random_forest": "random_forest",
}


class UsageError(Exception):
    pass


def _csv_list(choices=None, alias=None):
    def parse(text: str) -> list[str]:
        items = [t.strip().lower() for t in str(text).split(",") if t.strip()]
        if alias:
            items = [alias.get(t, t) for t in items]
        if not items:
            raise argparse.ArgumentTypeError("empty list")
        if choices is not None:
            bad = [t for t in items if t not in choices]
            if bad:
                raise argparse.ArgumentTypeError(f"invalid choice(s) {bad}; choose from {sorted(choices)}")
        return items

    return parse


def _int_ranges(text: str) -> list[int]:
    """Parse '5', '2-7' or '2,4,6'."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        try:
            if "-" in part:
                lo, hi = (int(p) for p in part.split("-", 1))
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad integer range {text!r}") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("reference counts must be positive")
    return sorted(set(out))


def _positive_int(text) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    from .classifiers import ModelKind
    from .evaluation import Aggregation, FeatureSubset, Task

    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    g.add_argument("--config", help="JSON config file mirroring the flags")
    g.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    g.add_argument("--output-dir", default=".", help="directory for default output paths")

    parser = _Parser(prog="wristsig", description="Wrist-worn motion signature verification toolkit.")
    parser.add_argument("--version", action="version", version=f"wristsig {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic corpus")
    p.add_argument("--users", type=_positive_int, default=66)
    p.add_argument("--genuine", type=_positive_int, default=15)
    p.add_argument("--forgers", type=_positive_int, default=5, help="forgers per user")
    p.add_argument("--forgeries-per-forger", type=_positive_int, default=3)
    p.add_argument("--null", action="store_true", help="forgeries drawn exactly like genuine samples")
    p.add_argument("--out", help="corpus directory (default OUTPUT_DIR/corpus)")

    kinds = [k.value for k in ModelKind]
    p = sub.add_parser("train", parents=[common], help="train a global model on a corpus")
    p.add_argument("--corpus", required=True, help="corpus directory or manifest")
    p.add_argument("--classifier", type=_csv_list(kinds, _CLASSIFIER_ALIASES), default=["logistic"])
    p.add_argument("--subset", choices=[s.value for s in FeatureSubset], default="all")
    p.add_argument("--n-refs", type=_positive_int, default=5)
    p.add_argument("--n-trees", type=_positive_int, default=100)
    p.add_argument("--model", help="output model file (default OUTPUT_DIR/model.msig)")

    p = sub.add_parser("evaluate", parents=[common], help="run the leave-one-user-out protocol")
    p.add_argument("--corpus", required=True)
    p.add_argument("--classifier", type=_csv_list(kinds, _CLASSIFIER_ALIASES), default=["logistic"],
                   help="comma-separated classifiers")
    p.add_argument("--task", type=_csv_list([t.value for t in Task]), default=["skilled", "random", "any"])
    p.add_argument("--subset", type=_csv_list([s.value for s in FeatureSubset]), default=["all"])
    p.add_argument("--n-refs", type=_int_ranges, default=[5], help="e.g. 5, 2-7 or 2,4,6")
    p.add_argument("--reps", type=_positive_int, default=25)
    p.add_argument("--genuine-eval", type=_positive_int, default=8)
    p.add_argument("--random-forgers", type=int, default=None,
                   help="random forgeries per user (default min(10, users - 1))")
    p.add_argument("--aggregation", choices=[a.value for a in Aggregation], default="per_execution")
    p.add_argument("--n-trees", type=_positive_int, default=100)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--report", help="results file (default OUTPUT_DIR/report.json)")

    p = sub.add_parser("enroll", parents=[common], help="enroll reference recordings")
    p.add_argument("--store", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--overwrite", action="store_true")
    p.add_argument("recordings", nargs="+", help="CSV recordings")

    p = sub.add_parser("verify", parents=[common], help="verify one recording (exit 0 GENUINE, 1 FORGED)")
    p.add_argument("--store", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("recording")

    p = sub.add_parser("serve", parents=[common], help="start the verification HTTP service")
    p.add_argument("--bind", default=None, help="HOST:PORT (default 127.0.0.1:8080)")
    p.add_argument("--model", default=None)
    p.add_argument("--store", default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--replay-window", type=float, default=None, help="seconds")
    return parser


def _option_strings(subparser: argparse.ArgumentParser) -> dict[str, argparse.Action]:
    return {
        a.dest: a
        for a in subparser._actions
        if a.option_strings and a.dest not in ("help", "config")
    }


def _tokens(actions: dict, values: dict, origin: str) -> list[str]:
    out = []
    for key, value in values.items():
        dest = key.replace("-", "_")
        if dest not in actions:
            raise UsageError(f"{origin}: unknown option {key!r}")
        action = actions[dest]
        flag = max(action.option_strings, key=len)
        if isinstance(action, argparse._StoreTrueAction):
            if str(value).lower() in ("1", "true", "yes", "on"):
                out.append(flag)
        elif isinstance(action, argparse._CountAction):
            out.extend([flag] * int(value))
        else:
            if isinstance(value, (list, tuple)):
                value = ",".join(str(v) for v in value)
            out.extend([flag, str(value)])
    return out


def _expand_argv(parser, argv: list[str]) -> list[str]:
    """Prefix config-file and environment values as flags so argparse validates them."""
    subparsers = parser._subparsers._group_actions[0].choices if parser._subparsers else {}
    if not argv or argv[0] not in subparsers:
        return argv
    command, rest = argv[0], argv[1:]
    actions = _option_strings(subparsers[command])
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(rest)
    tokens: list[str] = []
    if known.config:
        try:
            raw = json.loads(Path(known.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {known.config}: {exc}") from None
        sections = set(subparsers)
        flat = {k: v for k, v in raw.items() if k not in sections}
        flat.update(raw.get(command, {}))
        tokens += _tokens(actions, flat, known.config)
    env = {
        k[len(ENV_PREFIX):].lower(): v
        for k, v in os.environ.items()
        if k.startswith(ENV_PREFIX) and k[len(ENV_PREFIX):].lower() in actions
    }
    tokens += _tokens(actions, env, "environment")
    return [command] + tokens + rest


def _setup_logging(verbosity: int) -> None:
    level = logging.WARNING - 10 * min(verbosity, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.getLogger().setLevel(level)


def _load_corpus(path):
    from .storage import read_corpus

    return read_corpus(path)


def cmd_generate(args) -> int:
    from .storage import write_corpus
    from .synth import GeneratorParams, generate_corpus, null_params

    kw = dict(
        n_users=args.users,
        n_genuine=args.genuine,
        n_forgers_per_user=args.forgers,
        n_forgeries_per_forger=args.forgeries_per_forger,
        seed=args.seed,
    )
    params = null_params(**kw) if args.null else GeneratorParams(**kw)
    out = Path(args.out or Path(args.output_dir) / "corpus")
    manifest = write_corpus(generate_corpus(params), out)
    print(f"wrote {params.n_users} users to {manifest}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .classifiers import build_training_set, save_model, train
    from .evaluation import FeatureSubset

    if len(args.classifier) != 1:
        raise UsageError("train takes exactly one classifier")
    corpus = _load_corpus(args.corpus)
    subset = FeatureSubset(args.subset)
    ts = build_training_set(corpus, args.seed, args.n_refs, feature_mask=subset.dimensions)
    model = train(args.classifier[0], ts, seed=args.seed, n_trees=args.n_trees)
    model.metadata.update({"seed": args.seed, "n_refs": args.n_refs, "subset": subset.value})
    out = Path(args.model or Path(args.output_dir) / "model.msig")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    c = ts.counts
    print(f"trained {model.kind.value} on {c['genuine']} genuine / {c['forged']} forged instances -> {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .evaluation import ExperimentConfig, run_experiment

    corpus = _load_corpus(args.corpus)
    n_random = args.random_forgers
    if n_random is None:
        n_random = min(10, len(corpus) - 1)
        if n_random < 10:
            log.warning("corpus has %d users; using %d random forgeries per user", len(corpus), n_random)
    config = ExperimentConfig(
        n_repetitions=args.reps,
        n_refs=tuple(args.n_refs),
        n_genuine_eval=args.genuine_eval,
        n_random_forgers=n_random,
        tasks=tuple(args.task),
        classifiers=tuple(args.classifier),
        subsets=tuple(args.subset),
        seed=args.seed,
        aggregation=args.aggregation,
        n_trees=args.n_trees,
    )
    report = run_experiment(corpus, config, jobs=args.jobs)
    path = report.write(args.report or Path(args.output_dir) / "report.json")
    print(report.to_table())
    print(f"report written to {path}")
    return EXIT_OK


def cmd_enroll(args) -> int:
    from .storage import ReferenceStore, read_recording

    store = ReferenceStore(args.store)
    recordings = [read_recording(p, args.user) for p in args.recordings]
    changed = store.enroll(args.user, recordings, overwrite=args.overwrite)
    state = "enrolled" if changed else "already enrolled with identical references"
    print(f"{args.user}: {state} ({len(store.get_references(args.user))} references)")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .classifiers import load_model, predict_score
    from .features import extract_features
    from .signal import Label, preprocess
    from .storage import ReferenceStore, read_recording

    store = ReferenceStore(args.store)
    refs = store.get_references(args.user)
    model = load_model(args.model)
    recording = read_recording(args.recording, args.user)
    score = predict_score(model, extract_features(preprocess(recording, refs.k), refs))
    decision = score.decision(args.threshold)
    print(f"{decision.value.upper()} score={score.probability_genuine:.6f}")
    return EXIT_OK if decision is Label.GENUINE else EXIT_FORGED


def cmd_serve(args) -> int:
    from .service import _parse_bind, load_service_config, serve

    overrides = {"model_path": args.model, "store_path": args.store, "threshold": args.threshold,
                 "replay_window_s": args.replay_window}
    if args.bind:
        overrides["host"], overrides["port"] = _parse_bind(args.bind)
    try:
        # config-file values already arrived as flags; only the environment is consulted here
        config = load_service_config(None, **overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not config.model_path or not config.store_path:
        raise UsageError("serve needs --model and --store (or config / environment equivalents)")
    serve(config)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "enroll": cmd_enroll,
    "verify": cmd_verify,
    "serve": cmd_serve,
}


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_expand_argv(parser, argv))
        if not args.command:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    _setup_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"wristsig {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (WristSigError, FileNotFoundError) as exc:
        print(f"wristsig {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:
        log.debug("internal error", exc_info=True)
        print(f"wristsig {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
