"""Command-line entry point.

Exit status: 0 success, 1 domain error (bad data, unrealisable request),
2 usage error (bad flags, missing input files).  Data goes to files or
stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import codes as C
from . import lab
from . import reducers as R
from . import shatter as S
from . import synth
from .errors import MultireduceError

log = logging.getLogger("multireduce")


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get("MULTIREDUCE_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"MULTIREDUCE_SEED must be an integer, got {raw!r}") from None


def _open_in(path):
    try:
        return open(path)
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None


def _emit(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------- subcommands

def cmd_code(args):
    if args.kind == "info":
        if not args.file:
            raise UsageError("code info needs --file")
        with _open_in(args.file) as fh:
            M = C.read_code(fh)
        u = C.sensitive_vector(M) if M.is_binary and C.max_min_distance(M) > 0 else None
        lines = [f"classes {M.num_classes}", f"length {M.code_length}",
                 f"min_distance {C.code_distance(M)}", f"max_nearest_distance {C.max_min_distance(M)}"]
        if u is not None:
            q, coords = C.sensitivity(M, u)
            lines += ["sensitive_vector " + " ".join(map(str, u.tolist())), f"sensitivity {q}",
                      "sensitive_coordinates " + " ".join(str(j + 1) for j in coords)]
        _emit("\n".join(lines) + "\n", args.out)
        return
    if args.k is None:
        raise UsageError(f"code {args.kind} needs --k")
    if args.kind == "ova":
        M = C.ova_code(args.k)
    elif args.kind == "ap":
        M = C.ap_code(args.k)
    else:
        if args.l is None:
            raise UsageError("code random needs --l")
        M = C.random_code(args.k, args.l, args.seed, distinct_rows=args.distinct_rows)
    _emit(C.format_code(M), args.out)


def cmd_gen(args):
    spec = {"kind": args.kind, "seed": args.seed, "sigma": args.sigma}
    if args.k is not None:
        spec["k"] = args.k
    if args.d is not None:
        spec["d"] = args.d
    if args.with_center:
        spec["with_center"] = True
    try:
        dist = synth.from_config(spec)
    except KeyError as exc:
        raise UsageError(f"gen {args.kind} needs --{exc.args[0]}") from None
    data = synth.sample(dist, args.n, args.seed)
    if args.label_map is not None:
        phi = synth.random_label_map(dist.k, args.label_map, args.rule, args.seed)
        data = synth.apply_label_map(data, phi)
    _emit(synth.sample_to_csv(data), args.out)


def _read_sample(path, k=None):
    with _open_in(path) as fh:
        return synth.read_csv(fh, k)


def cmd_train(args):
    data = _read_sample(args.data, args.k)
    k = args.k or data.num_classes
    learner = R.LearnerConfig(mode=args.mode, seed=args.seed)
    if args.method == "msvm":
        mode = "realizable" if args.mode in ("auto", "realizable") else "approximate"
        try:
            model = R.train_msvm(data, mode, budget=args.budget, seed=args.seed, k=k)
        except MultireduceError:
            if args.mode != "auto":
                raise
            model = R.train_msvm(data, "approximate", seed=args.seed, k=k)
    elif args.method == "ova":
        model = R.train_ova(data, learner, k)
    elif args.method == "ap":
        model = R.train_ap(data, learner, k)
    elif args.method == "ecoc":
        if args.code:
            with _open_in(args.code) as fh:
                M = C.read_code(fh)
        else:
            M = C.random_code(k, args.l or 4, args.seed, distinct_rows=2 ** (args.l or 4) >= 2 * k)
        model = R.train_ecoc(M, data, learner)
    else:
        tree_seed = args.seed if args.tree_seed is None else args.tree_seed
        shape = lab.tree_from_spec(args.tree, k, tree_seed)
        if args.labels:
            labels = [int(t) for t in args.labels.split(",")]
        else:
            lam_seed = args.seed if args.lambda_seed is None else args.lambda_seed
            labels = np.random.default_rng(lam_seed).permutation(k) + 1
        model = R.train_tree(shape, labels, data, learner)
    _emit(R.format_model(model), args.out)
    log.info("training error %.6f", R.multiclass_error(model, data))


def cmd_convert(args):
    with _open_in(args.model) as fh:
        model = R.read_model(fh)
    if args.to == "msvm":
        if not isinstance(model, R.TreeModel):
            raise MultireduceError("tree-to-MSVM conversion needs a tree model")
        if not args.reference:
            raise UsageError("conversion to msvm needs --reference")
        ref = _read_sample(args.reference).X
        W, rep = R.tree_to_msvm(model, ref, args.eps, return_report=True)
        log.info("gamma %.6g a %.6g depth %d", rep.gamma, rep.a, rep.depth)
        out = W
    else:
        if not isinstance(model, R.WeightMatrix):
            raise MultireduceError("MSVM-to-all-pairs conversion needs an msvm model")
        out = R.msvm_to_ap(model)
    _emit(R.format_model(out), args.out)


def cmd_eval(args):
    with _open_in(args.model) as fh:
        model = R.read_model(fh)
    data = _read_sample(args.data, model.num_classes)
    pred = model.predict(data.X)
    if args.predictions:
        with open(args.predictions, "w") as fh:
            fh.write("\n".join(str(int(p)) for p in pred) + "\n")
    _emit(f"n {len(data)}\nerror {R.multiclass_error(model, data)!r}\n", args.out)


def cmd_shatter(args):
    if args.check == "code":
        if args.code:
            with _open_in(args.code) as fh:
                M = C.read_code(fh)
        elif args.ova:
            M = C.ova_code(args.ova)
        else:
            raise UsageError("shatter code needs --code or --ova")
        if args.u:
            u = np.array([int(t) for t in args.u.split(",")])
        elif args.ova and not args.code:
            u = C.ova_sensitive_vector(args.ova)
        else:
            u = C.sensitive_vector(M)
        res = S.code_witness_check(M, u, args.d)
    elif args.check == "tree":
        if not args.tree:
            raise UsageError("shatter tree needs --tree")
        shape = S.TreeShape.from_string(args.tree)
        res = S.tree_witness_check(shape, args.d, method=args.method)
    elif args.check == "dims":
        if args.l is None:
            raise UsageError("shatter dims needs --l")
        cls = S.build_F(args.d, args.l) if args.family == "F" else S.build_G(args.d, args.l)
        cls = cls.deduplicated()
        text = (f"functions {len(cls)}\nvc {S.vc_dimension(cls)}\n"
                f"graph {S.graph_dimension(cls)}\nnatarajan {S.natarajan_dimension(cls)}\n")
        _emit(text, args.out)
        return 0
    else:
        if args.l is None:
            raise UsageError("shatter embed needs --l")
        emb = (S.embed_F_halfspaces(args.d, args.l, args.seed) if args.family == "F"
               else S.embed_G_halfspaces(args.d, args.l))
        _emit(S.format_embedding(emb), args.out)
        return 0
    _emit(S.format_witness(res), args.out)
    return 0 if res.holds else 1


def cmd_lab(args):
    if args.action == "list":
        _emit("\n".join(sorted(lab.EXPERIMENTS)) + "\n", None)
        return
    if not args.config:
        raise UsageError("lab run needs --config")
    if not os.path.exists(args.config):
        raise UsageError(f"config file not found: {args.config}")
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {args.config} is not valid JSON: {exc}") from None
    try:
        cfg = lab.ExperimentConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad config {args.config}: {exc}") from None
    if args.seed_given:
        cfg.seed = args.seed
    out = args.out or cfg.out
    if not out:
        raise UsageError("lab run needs --out (or 'out' in the config)")
    result = lab.run_experiment(cfg, threads=args.threads)
    for path in lab.write_results(result, cfg, out):
        log.info("wrote %s", path)
    for msg in result.warnings:
        print(f"warning: {msg}", file=sys.stderr)


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="random seed (default: $MULTIREDUCE_SEED or 0)")
    common.add_argument("--threads", type=int, default=1, help="cap on worker processes")
    common.add_argument("--out", help="output file or directory (default: stdout)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="multireduce", description="Multiclass reductions toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("code", parents=[common], help="build or inspect code matrices")
    c.add_argument("kind", choices=["ova", "ap", "random", "info"])
    c.add_argument("--k", type=int)
    c.add_argument("--l", type=int)
    c.add_argument("--distinct-rows", action="store_true")
    c.add_argument("--file", help="code file for 'info'")
    c.set_defaults(func=cmd_code)

    g = sub.add_parser("gen", parents=[common], help="sample a synthetic dataset as CSV")
    g.add_argument("kind", choices=["circle", "sector3", "random", "two-points", "simplex"])
    g.add_argument("--k", type=int)
    g.add_argument("--d", type=int)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--sigma", type=float, default=0.0)
    g.add_argument("--with-center", action="store_true")
    g.add_argument("--label-map", type=float, metavar="MU",
                   help="emit a binary sample relabelled by a random map with negative rate MU")
    g.add_argument("--rule", choices=["exact", "iid"], default="exact")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", parents=[common], help="train a multiclass model on CSV data")
    t.add_argument("method", choices=["msvm", "ova", "ap", "ecoc", "tree"])
    t.add_argument("--data", required=True)
    t.add_argument("--k", type=int)
    t.add_argument("--mode", choices=["auto", "realizable", "approximate"], default="auto")
    t.add_argument("--budget", type=int, default=100_000)
    t.add_argument("--code", help="code file for ecoc")
    t.add_argument("--l", type=int, help="random code length for ecoc")
    t.add_argument("--tree", default="balanced", help="balanced, chain, random or a shape string")
    t.add_argument("--labels", help="comma-separated leaf labels, left to right")
    t.add_argument("--tree-seed", type=int, help="seed for --tree random (default: --seed)")
    t.add_argument("--lambda-seed", type=int, help="seed for the random leaf labelling (default: --seed)")
    t.set_defaults(func=cmd_train)

    v = sub.add_parser("convert", parents=[common], help="tree -> msvm or msvm -> all-pairs")
    v.add_argument("to", choices=["msvm", "ap"])
    v.add_argument("--model", required=True)
    v.add_argument("--reference", help="CSV of reference points (tree -> msvm)")
    v.add_argument("--eps", type=float, default=0.01)
    v.set_defaults(func=cmd_convert)

    e = sub.add_parser("eval", parents=[common], help="error of a model on CSV data")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--predictions", help="also write one predicted label per line here")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("shatter", parents=[common], help="shattering witnesses and dimensions")
    s.add_argument("check", choices=["code", "tree", "dims", "embed"],
                   help="code/tree: N-shattering witness for a code or tree shape; dims: VC, graph "
                        "and Natarajan dimensions of the witness classes; embed: halfspace embedding")
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--l", type=int)
    s.add_argument("--code")
    s.add_argument("--ova", type=int, metavar="K")
    s.add_argument("--u", help="comma-separated +-1 vector (default: constructed sensitive vector)")
    s.add_argument("--tree")
    s.add_argument("--method", choices=["auto", "explicit", "decomposed"], default="auto")
    s.add_argument("--family", choices=["F", "G"], default="F")
    s.set_defaults(func=cmd_shatter)

    lb = sub.add_parser("lab", parents=[common], help="run experiments")
    lb.add_argument("action", choices=["run", "list"])
    lb.add_argument("--config")
    lb.set_defaults(func=cmd_lab)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        args.seed_given = args.seed is not None or "MULTIREDUCE_SEED" in os.environ
        if args.seed is None:
            args.seed = _default_seed()
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        status = args.func(args)
    except UsageError as exc:
        print(f"multireduce: error: {exc}", file=sys.stderr)
        return 2
    except (MultireduceError, ValueError) as exc:
        print(f"multireduce: {exc}", file=sys.stderr)
        return 1
    return int(status or 0)


if __name__ == "__main__":
    sys.exit(main())
