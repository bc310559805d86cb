"""Command-line interface: ``sonmf-kit {factorize,simulate,textpipe}``.

Each command writes into its own ``--out`` directory with fixed file names
and exits 0 on success, 2 on invalid input, 3 on I/O failure and 4 when the
solver stalls before accepting a single step.
"""

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .api import ALL_METHODS, is_binary_method
from .api import fit as fit_method
from .matio import read_matrix, write_matrix
from .metrics import evaluate
from .simulation import (MethodSpec, ScenarioSpec, run_init_study, run_step_size_study,
                         run_trials)
from .sonmf import INITS
from .textpipe import (WEIGHTINGS, build_bag_of_words, format_topics, project_features,
                       read_corpus, topic_summary, train_test_split, vectorize,
                       inverse_document_frequency, weight_matrix, write_features)

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
SEED_ENV = "SONMF_KIT_SEED"
STUDIES = ("trials", "init", "step_size")


class UsageError(ValueError):
    pass


class StalledError(RuntimeError):
    pass


def _digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _resolve_seed(seed):
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None


def _out_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_trace(path, method, trace):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "method", "value"])
        for i, v in enumerate(trace):
            w.writerow([i, method, repr(float(v))])


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest(command, argv, config, seed, started, **rest):
    return {
        "command": command,
        "argv": list(argv),
        "config": config,
        "seed": seed,
        "version": __version__,
        "started": started,
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        **rest,
    }


def _fit_options(args, seed):
    """Keyword options for ``api.fit`` from the shared solver flags."""
    opts = {"max_iters": args.max_iters, "epsilon": args.epsilon, "seed": seed,
            "init": args.init}
    if args.tau is not None:
        opts["tau"] = args.tau
    if args.eta is not None:
        opts["eta"] = args.eta
    return opts


def _fit(X, method, k, opts):
    res = fit_method(X, method, k, **opts)
    if res.termination == "stalled":
        raise StalledError(f"{method}: no step was accepted before the stopping rule fired")
    return res


# -- commands ----------------------------------------------------------------

def cmd_factorize(args, argv):
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    seed = _resolve_seed(args.seed)
    opts = _fit_options(args, seed)
    X = read_matrix(args.input)
    res = _fit(X, args.method, args.k, opts)
    out = _out_dir(args.out)
    write_matrix(out / "f.mtx", res.F)
    write_matrix(out / "g.mtx", res.G)
    _write_trace(out / "trace.csv", args.method, res.objective_trace)
    rec = evaluate(X, res.F, res.G, binary=is_binary_method(args.method), result=res)
    config = {"input": str(args.input), "method": args.method, "k": args.k, **opts}
    _write_json(out / "manifest.json", _manifest(
        "factorize", argv, config, seed, started,
        inputs={str(args.input): _digest(args.input)},
        metrics=rec.to_dict(), result=res.manifest()))
    return EXIT_OK


def load_config(name_or_path):
    """Parse a TOML study config from a path or a bundled config name."""
    path = Path(name_or_path)
    if path.exists():
        with open(path, "rb") as fh:
            return tomllib.load(fh), str(path)
    bundled = resources.files("sonmf_kit") / "configs" / f"{name_or_path}.toml"
    if bundled.is_file():
        return tomllib.loads(bundled.read_text(encoding="utf-8")), f"bundled:{name_or_path}"
    raise FileNotFoundError(f"no config file or bundled config named {name_or_path!r}")


def _parse_methods(entries):
    methods = []
    for e in entries:
        if isinstance(e, str):
            methods.append(MethodSpec(e, e))
        elif isinstance(e, dict) and "method" in e:
            methods.append(MethodSpec(e.get("label", e["method"]), e["method"],
                                      dict(e.get("options", {}))))
        else:
            raise UsageError(f"bad method entry {e!r}")
    for m in methods:
        if m.method not in ALL_METHODS:
            raise UsageError(f"unknown method {m.method!r}")
    return methods


def run_study(config, jobs=1):
    """Run the study described by a parsed config; returns a ``TrialSummary``."""
    if "scenario" not in config or "study" not in config:
        raise UsageError("config needs [scenario] and [study] tables")
    try:
        spec = ScenarioSpec(**config["scenario"])
    except TypeError as exc:
        raise UsageError(f"bad [scenario] table: {exc}") from None
    study = dict(config["study"])
    kind = study.pop("kind", "trials")
    trials = int(study.pop("trials", 1))
    max_iters = int(study.pop("max_iters", 500))
    if kind == "trials":
        methods = _parse_methods(study.pop("methods", []))
        summary = run_trials(spec, methods, trials, max_iters=max_iters, jobs=jobs)
    elif kind == "init":
        summary = run_init_study(spec, tuple(study.pop("inits", INITS)), trials,
                                 max_iters=max_iters, jobs=jobs)
    elif kind == "step_size":
        summary = run_step_size_study(spec, tuple(study.pop("etas")), trials,
                                      max_iters=max_iters, jobs=jobs)
    else:
        raise UsageError(f"unknown study kind {kind!r}; expected one of {STUDIES}")
    if study:
        raise UsageError(f"unused [study] keys: {sorted(study)}")
    return summary


def cmd_simulate(args, argv):
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    config, source = load_config(args.config)
    summary = run_study(config, jobs=args.jobs)
    out = _out_dir(args.out)
    summary.to_json(out / "summary.json")
    summary.write_traces(out / "trace.csv")
    if summary.eps_p_traces:
        summary.write_traces(out / "eps_p_trace.csv", which="eps_p")
    _write_json(out / "manifest.json", _manifest(
        "simulate", argv, config, config["scenario"].get("seed", 0), started,
        source=source, jobs=args.jobs))
    return EXIT_OK


def cmd_textpipe(args, argv):
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    seed = _resolve_seed(args.seed)
    if args.weighting == "tfidf" and is_binary_method(args.method):
        raise UsageError(f"{args.method} needs --weighting binary")
    docs, labels = read_corpus(args.corpus)
    if not docs:
        raise UsageError(f"{args.corpus}: empty corpus")
    ids = [str(i) for i in range(len(docs))]
    train, test = train_test_split(len(docs), args.test_split, seed)
    pick = lambda seq, idx: None if seq is None else [seq[i] for i in idx]  # noqa: E731
    bow = build_bag_of_words(pick(docs, train), args.min_doc_freq,
                             doc_ids=pick(ids, train), labels=pick(labels, train))
    X = weight_matrix(bow, args.weighting)
    opts = _fit_options(args, seed)
    res = _fit(X, args.method, args.k, opts)

    out = _out_dir(args.out)
    write_matrix(out / "f.mtx", res.F)
    write_matrix(out / "g.mtx", res.G)
    _write_trace(out / "trace.csv", args.method, res.objective_trace)
    with open(out / "vocabulary.txt", "w", encoding="utf-8") as fh:
        fh.write("\n".join(bow.vocabulary) + "\n")
    with open(out / "topics.txt", "w", encoding="utf-8") as fh:
        fh.write(format_topics(topic_summary(res.F, bow.vocabulary, args.topics)))
    write_features(out / "features_train.csv", bow.doc_ids, bow.labels,
                   project_features(X, res.F))
    if len(test):
        test_bow = vectorize(pick(docs, test), bow.vocabulary, doc_ids=pick(ids, test),
                             labels=pick(labels, test))
        idf = inverse_document_frequency(bow.counts)
        X_test = weight_matrix(test_bow, args.weighting, idf=idf)
        write_features(out / "features_test.csv", test_bow.doc_ids, test_bow.labels,
                       project_features(X_test, res.F))

    rec = evaluate(X, res.F, res.G, binary=is_binary_method(args.method), result=res)
    config = {"corpus": str(args.corpus), "method": args.method, "k": args.k,
              "weighting": args.weighting, "test_split": args.test_split,
              "min_doc_freq": args.min_doc_freq, "topics": args.topics, **opts}
    _write_json(out / "manifest.json", _manifest(
        "textpipe", argv, config, seed, started,
        inputs={str(args.corpus): _digest(args.corpus)},
        bag_of_words=bow.stats(), train_docs=len(train), test_docs=len(test),
        metrics=rec.to_dict(), result=res.manifest()))
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {s}")
    return v


def _solver_flags(p, default_method):
    p.add_argument("--method", choices=ALL_METHODS, default=default_method)
    p.add_argument("--k", type=_positive_int, required=True, help="factorization rank")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--epsilon", type=float, default=1e-4,
                   help="stop when the objective drops by at most this much")
    p.add_argument("--tau", type=float, help="initial Cayley step size (SONMF variants)")
    p.add_argument("--eta", type=float, help="Newton step size for G (sonmf-binary)")
    p.add_argument("--seed", type=int, help=f"random seed (falls back to ${SEED_ENV}, then 0)")
    p.add_argument("--init", choices=INITS, default="svd")
    p.add_argument("--out", required=True, help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="sonmf-kit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("factorize", help="factorize a matrix file (.mtx or .csv)")
    p.add_argument("input")
    _solver_flags(p, "sonmf")
    p.set_defaults(func=cmd_factorize)

    p = sub.add_parser("simulate", help="run a simulation study from a TOML config")
    p.add_argument("config", help="config path or bundled name, e.g. smoke or table1_k10")
    p.add_argument("--jobs", type=_positive_int, default=1, help="parallel trial workers")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("textpipe", help="vectorize a corpus, factorize, summarize topics")
    p.add_argument("corpus", help="text file (one document per line) or label,text CSV")
    _solver_flags(p, "sonmf")
    p.add_argument("--weighting", choices=WEIGHTINGS, default="tfidf")
    p.add_argument("--test-split", type=float, default=0.0)
    p.add_argument("--min-doc-freq", type=_positive_int, default=1)
    p.add_argument("--topics", type=_positive_int, default=5, help="terms per topic side")
    p.set_defaults(func=cmd_textpipe)
    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)  # exits 2 on bad flags
    try:
        return args.func(args, argv)
    except StalledError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, TypeError, tomllib.TOMLDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
