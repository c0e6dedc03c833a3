"""Command-line front end.

Exit codes: 0 success, 2 validation error, 3 zero count in strict mode,
4 oracle enumeration cap exceeded.
"""
from __future__ import annotations

import argparse
import os
import sys

from . import io as fio
from .experiments import FAMILIES, generate_model, parse_config, run_experiment, write_results
from .model import ValidationError
from .oracle import CapExceeded, joint_table, normalized_symmetric_kl, symmetric_kl
from .params import ClipConfig, factor_graph_parameter_learn, parameter_sample_bound
from .sampling import ZeroCount, exact_sample, gibbs_sample
from .structure import factor_graph_structure_learn, structure_sample_bound

EXIT_OK, EXIT_VALIDATION, EXIT_ZERO_COUNT, EXIT_CAP = 0, 2, 3, 4


def parse_baseline(text: str, n: int) -> tuple[int, ...]:
    if text in ("zeros", "0"):
        return (0,) * n
    values = tuple(int(v) for v in text.replace(" ", "").split(","))
    if len(values) != n:
        raise ValidationError(f"baseline has {len(values)} values, model has {n} variables")
    return values


def _clip(args) -> ClipConfig:
    if args.mode == "clipped" and args.gamma is None:
        raise ValidationError("--mode clipped needs --gamma")
    return ClipConfig(args.mode, args.gamma)


def cmd_gen_model(args) -> None:
    options = {}
    if args.family == "random":
        options.update(k=args.k, degree=args.degree)
    if args.family == "grid" and args.rows is not None:
        options["rows"] = args.rows
    graph = generate_model(args.family, args.n, args.max_card, args.strength, args.seed, **options)
    fio.write_graph(graph, args.out)


def cmd_sample(args) -> None:
    graph = fio.read_graph(args.model)
    if args.method == "exact":
        data = exact_sample(joint_table(graph), args.m, args.seed)
    else:
        data = gibbs_sample(graph, args.m, args.burn_in, args.thinning, args.seed, args.chains)
    fio.write_samples(data, args.out)


def cmd_learn_params(args) -> None:
    graph = fio.read_graph(args.model)
    data = fio.read_samples(args.data, graph.variables)
    baseline = parse_baseline(args.baseline, graph.n)
    model = factor_graph_parameter_learn(graph.scopes, data, baseline, _clip(args))
    fio.write_model(model, args.out)


def cmd_learn_struct(args) -> None:
    data = fio.read_samples(args.data)
    baseline = parse_baseline(args.baseline, data.n)
    model = factor_graph_structure_learn(data, args.k, args.b, baseline, args.epsilon, _clip(args))
    fio.write_model(model, args.out)
    if args.report:
        with open(args.report, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("# scope | chosen blanket | conditional entropy (nats)\n")
            for c in model.blanket_choices:
                fh.write(" ".join(map(str, c.scope)) + " | " + " ".join(map(str, c.chosen_blanket))
                         + " | " + format(c.entropy, ".17g") + "\n")


def cmd_eval(args) -> None:
    p = joint_table(fio.read_graph(args.reference))
    q = joint_table(fio.read_graph(args.model))
    print(f"sym-kl {symmetric_kl(p, q):.17g}")
    print(f"normalized-sym-kl {normalized_symmetric_kl(p, q):.17g}")


def cmd_bound(args) -> None:
    if args.which == "params":
        value = parameter_sample_bound(args.epsilon, args.delta, args.k, args.b, args.gamma, args.J, args.v)
    else:
        value = structure_sample_bound(args.epsilon, args.delta, args.k, args.b, args.gamma, args.v, args.n)
    print(value)


def cmd_run(args) -> None:
    with open(args.config, encoding="utf-8") as fh:
        config = parse_config(fh.read(), base_dir=os.path.dirname(os.path.abspath(args.config)))
    write_results(run_experiment(config), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fglearn", description="Factor graph learning from samples.",
                                     epilog=__doc__.split("\n\n", 1)[1].strip())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-model", help="write a seeded model from a graph family")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--max-card", type=int, default=2)
    p.add_argument("--strength", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=2, help="max scope size (random family)")
    p.add_argument("--degree", type=int, default=3, help="max factors per variable (random family)")
    p.add_argument("--rows", type=int, help="grid rows")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_model)

    p = sub.add_parser("sample", help="draw samples from a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=("exact", "gibbs"), default="exact")
    p.add_argument("--burn-in", type=int, default=100)
    p.add_argument("--thinning", type=int, default=1)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    helps = {"learn-params": "estimate canonical factors for a known structure",
             "learn-struct": "learn scopes and factors from samples alone"}
    for name, func in (("learn-params", cmd_learn_params), ("learn-struct", cmd_learn_struct)):
        p = sub.add_parser(name, help=helps[name])
        if name == "learn-params":
            p.add_argument("--model", required=True, help="structure file; its factor scopes are used")
        else:
            p.add_argument("--k", type=int, required=True)
            p.add_argument("--b", type=int, required=True)
            p.add_argument("--epsilon", type=float, required=True)
            p.add_argument("--report")
        p.add_argument("--data", required=True)
        p.add_argument("--baseline", default="zeros")
        p.add_argument("--mode", choices=("strict", "clipped"), default="clipped")
        p.add_argument("--gamma", type=float)
        p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("eval", help="symmetric KL between two model files via enumeration")
    p.add_argument("--model", required=True)
    p.add_argument("--reference", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bound", help="sample-size bound calculators")
    p.add_argument("which", choices=("params", "struct"))
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--v", type=int, required=True)
    p.add_argument("--J", type=int, default=1, help="factor count (params)")
    p.add_argument("--n", type=int, default=1, help="variable count (struct)")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("run", help="run an experiment config, appending to a CSV table")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ZeroCount as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ZERO_COUNT
    except CapExceeded as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CAP
    except (ValidationError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
