"""Command-line interface.

Subcommands: generate, fit, path, baseline, eval, infer, sample, graph,
experiment. Global flags (--seed, --threads, --enum-cap, --config) come
before the subcommand. A JSON config file may supply any flag by its
long name with dashes replaced by underscores; explicit CLI flags win.

Exit codes: 0 success, 2 validation error, 3 capacity error,
4 fit did not converge (outputs are still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import baselines, estimation, inference, io, structure
from .errors import CapacityError, DcgError, ValidationError
from .experiments import (METHODS, SynthConfig, dag_lambda_max, generate_synthetic,
                          replicate, run_experiment, split_first, split_half_random,
                          summarize)
from .graphs import intervene_graph, markov_blanket, moralize
from .model import DirectedGraph, Model, StateSpace

log = logging.getLogger("dcg")


def _parse_assignments(text: str) -> dict[int, int]:
    out: dict[int, int] = {}
    if not text:
        return out
    for piece in text.split(","):
        try:
            key, value = piece.split("=")
            out[int(key)] = int(value)
        except ValueError:
            raise ValidationError(f"expected node=state pairs, got {piece!r}") from None
    return out


def _parse_nodes(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p != ""]
    except ValueError:
        raise ValidationError(f"expected comma-separated node ids, got {text!r}") from None


def _parse_card(text):
    if text is None:
        return None
    values = _parse_nodes(text)
    return values[0] if len(values) == 1 else values


def _parse_lambdas(text: str):
    if text == "auto":
        return "auto"
    try:
        return np.array([float(p) for p in text.split(",")], float)
    except ValueError:
        raise ValidationError(f"expected 'auto' or comma-separated floats, got {text!r}") from None


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise ValidationError(f"cannot read config {path}: {err}") from err
    if not isinstance(doc, dict):
        raise ValidationError("config file must hold a JSON object")
    return doc


class _Options:
    """CLI value > config file value > built-in default."""

    def __init__(self, args, config):
        self._args = args
        self._config = config

    def get(self, key, default=None):
        value = getattr(self._args, key, None)
        if value is not None:
            return value
        if key in self._config:
            return self._config[key]
        return default


def _load_dataset(opt) -> estimation.Dataset:
    data_path = opt.get("data")
    mask_path = opt.get("mask")
    if data_path is None or mask_path is None:
        raise ValidationError("--data and --mask are required")
    return io.ingest_dataset(data_path, mask_path, card=_parse_card(opt.get("card")))


def _space_for(opt, data) -> StateSpace:
    return io.inferred_space(data, card=_parse_card(opt.get("card")))


def _graph_arg(spec_text: str, n: int) -> DirectedGraph:
    if spec_text == "complete":
        return DirectedGraph.complete(n)
    try:
        doc = json.loads(Path(spec_text).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise ValidationError(f"cannot read graph file {spec_text}: {err}") from err
    edges = tuple((int(a), int(b)) for a, b in doc["edges"])
    return DirectedGraph(int(doc.get("n", n)), edges)


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=None)
    shared.add_argument("--threads", type=int, default=None)
    shared.add_argument("--enum-cap", dest="enum_cap", type=int, default=None)
    shared.add_argument("--config", default=None, help="JSON file mirroring CLI flags")
    shared.add_argument("-v", "--verbose", action="store_true", default=None)

    parser = argparse.ArgumentParser(prog="dcg", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_parser(name, **kw):
        return sub.add_parser(name, parents=[shared], **kw)

    p = add_parser("generate", help="sample a synthetic interventional dataset")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--edge-prob", dest="edge_prob", type=float, default=None)
    p.add_argument("-m", "--m", type=int, default=None)
    p.add_argument("--obs-fraction", dest="obs_fraction", type=float, default=None)
    p.add_argument("--card", default=None)
    p.add_argument("--out-data", dest="out_data", default=None)
    p.add_argument("--out-mask", dest="out_mask", default=None)
    p.add_argument("--out-model", dest="out_model", default=None)
    p.add_argument("--gibbs-fallback", dest="gibbs_fallback", action="store_true",
                   default=None)

    p = add_parser("fit", help="MAP fit on a fixed graph")
    p.add_argument("--data", default=None)
    p.add_argument("--mask", default=None)
    p.add_argument("--card", default=None)
    p.add_argument("--graph", default=None, help="'complete' or a JSON file with edges")
    p.add_argument("--lambda2", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p.add_argument("--pseudo", action="store_true", default=None)
    p.add_argument("--out", default=None)

    p = add_parser("path", help="group-sparse regularization path")
    p.add_argument("--data", default=None)
    p.add_argument("--mask", default=None)
    p.add_argument("--card", default=None)
    p.add_argument("--lambdas", default=None, help="'auto' or comma-separated values")
    p.add_argument("--n-lambdas", dest="n_lambdas", type=int, default=None)
    p.add_argument("--lambda2", type=float, default=None)
    p.add_argument("--holdout", type=float, default=None,
                   help="fraction of trailing rows held out (default 0.5)")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--models-out", dest="models_out", default=None)

    p = add_parser("baseline", help="fit a DAG or undirected comparison model")
    p.add_argument("--type", dest="model_type", default=None,
                   choices=("dag", "ug-observe", "ug-condition"))
    p.add_argument("--data", default=None)
    p.add_argument("--mask", default=None)
    p.add_argument("--card", default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--lambda2", type=float, default=None)
    p.add_argument("--n-cap", dest="n_cap", type=int, default=None)
    p.add_argument("--out", default=None)

    p = add_parser("eval", help="mean held-out NLL of a fitted model")
    p.add_argument("--model", default=None)
    p.add_argument("--data", default=None)
    p.add_argument("--mask", default=None)
    p.add_argument("--card", default=None)

    p = add_parser("infer", help="exact marginal / conditional / do query")
    p.add_argument("--model", default=None)
    p.add_argument("--query", default=None)
    p.add_argument("--observe", default=None)
    p.add_argument("--do", default=None)
    p.add_argument("--out", default=None)

    p = add_parser("sample", help="draw samples from a model")
    p.add_argument("--model", default=None)
    p.add_argument("-n", "--count", type=int, default=None)
    p.add_argument("--do", default=None)
    p.add_argument("--gibbs", action="store_true", default=None)
    p.add_argument("--sweeps", type=int, default=None)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=None)
    p.add_argument("--out", default=None)

    p = add_parser("graph", help="print blanket / moral / intervened graphs")
    p.add_argument("--model", default=None)
    p.add_argument("--blanket", type=int, default=None)
    p.add_argument("--moral", action="store_true", default=None)
    p.add_argument("--intervene", default=None, help="comma-separated target nodes")

    p = add_parser("experiment", help="four-method comparison harness")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--edge-prob", dest="edge_prob", type=float, default=None)
    p.add_argument("-m", "--m", type=int, default=None)
    p.add_argument("--obs-fraction", dest="obs_fraction", type=float, default=None)
    p.add_argument("--card", default=None)
    p.add_argument("--seeds", type=int, default=None, help="number of replicate seeds")
    p.add_argument("--methods", default=None, help="comma-separated method names")
    p.add_argument("--n-lambdas", dest="n_lambdas", type=int, default=None)
    p.add_argument("--lambda2", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--data", default=None, help="ingest instead of generating")
    p.add_argument("--mask", default=None)
    p.add_argument("--split", default=None, help="'first:N' or 'half-random'")
    p.add_argument("--out", default=None)
    return parser


def _cmd_generate(opt) -> int:
    cfg = SynthConfig(n=int(opt.get("n", 10)),
                      edge_prob=float(opt.get("edge_prob", 0.5)),
                      m=int(opt.get("m", 1000)),
                      obs_fraction=float(opt.get("obs_fraction", 1.0 / 11.0)),
                      seed=int(opt.get("seed", 0)),
                      card=int(opt.get("card", 2) or 2))
    model, data = generate_synthetic(cfg, enum_cap=opt.get("enum_cap"),
                                     gibbs_fallback=bool(opt.get("gibbs_fallback")))
    out_data = opt.get("out_data", "data.csv")
    out_mask = opt.get("out_mask", "mask.csv")
    io.write_dataset(out_data, out_mask, data)
    if opt.get("out_model"):
        io.save_model(opt.get("out_model"), model)
    print(f"wrote {data.m} rows to {out_data} / {out_mask}")
    return 0


def _cmd_fit(opt) -> int:
    data = _load_dataset(opt)
    space = _space_for(opt, data)
    graph = _graph_arg(opt.get("graph", "complete"), space.n)
    cfg = estimation.FitConfig(lambda2=float(opt.get("lambda2", 1e-4)),
                               tol=float(opt.get("tol", 1e-6)),
                               max_iter=int(opt.get("max_iter", 2000)))
    objective = "pseudo" if opt.get("pseudo") else "exact"
    result = estimation.fit_map(space, graph, data, cfg, objective=objective,
                                enum_cap=opt.get("enum_cap"))
    out = opt.get("out", "model.json")
    io.save_model(out, Model(space, graph, result.params))
    print(f"fit ({objective}) finished: fun={result.fun:.6f} "
          f"grad={result.grad_norm:.3e} iters={result.iterations} -> {out}")
    if not result.converged:
        print("warning: fit did not converge", file=sys.stderr)
        return 4
    return 0


def _cmd_path(opt) -> int:
    data = _load_dataset(opt)
    space = _space_for(opt, data)
    holdout = float(opt.get("holdout", 0.5))
    if not (0.0 <= holdout < 1.0):
        raise ValidationError("--holdout must be in [0, 1)")
    if holdout > 0:
        train, test = split_first(data, data.m - int(round(data.m * holdout)))
    else:
        train, test = data, None
    graph = DirectedGraph.complete(space.n)
    lambda2 = float(opt.get("lambda2", 1e-4))
    lambdas = _parse_lambdas(opt.get("lambdas", "auto"))
    if isinstance(lambdas, str):
        lam_max = structure.lambda_max(space, graph, train, lambda2,
                                       opt.get("enum_cap"))
        lambdas = structure.default_lambda_grid(lam_max, int(opt.get("n_lambdas", 20)))
    cfg = structure.GroupL1Config(lam=0.0, lambda2=lambda2,
                                  tol=float(opt.get("tol", 1e-6)))
    result = structure.reg_path(space, graph, train, lambdas, cfg, test=test,
                                enum_cap=opt.get("enum_cap"))
    out = opt.get("out", "path.csv")
    io.write_path_csv(out, result.points)
    models_dir = opt.get("models_out")
    if models_dir:
        Path(models_dir).mkdir(parents=True, exist_ok=True)
        for idx, pt in enumerate(result.points):
            io.save_model(Path(models_dir) / f"model_{idx:03d}.json",
                          Model(space, graph, pt.params))
    print(f"wrote {len(result.points)} path points to {out}")
    if not all(pt.converged for pt in result.points):
        print("warning: some path points did not converge", file=sys.stderr)
        return 4
    return 0


def _cmd_baseline(opt) -> int:
    model_type = opt.get("model_type")
    if model_type is None:
        raise ValidationError("--type is required")
    data = _load_dataset(opt)
    space = _space_for(opt, data)
    lam = float(opt.get("lam", 0.0))
    lambda2 = float(opt.get("lambda2", 1e-4))
    out = opt.get("out", "model.json")
    if model_type == "dag":
        model, score = baselines.dag_order_search(space, data, lam, lambda2,
                                                  n_cap=int(opt.get("n_cap", 10)))
        io.save_model(out, model)
        print(f"dag fit: score={score:.6f} edges={len(model.graph.edges)} -> {out}")
    else:
        mode = model_type.split("-")[1]
        cfg = structure.GroupL1Config(lam=lam, lambda2=lambda2)
        model, active = baselines.ug_fit_group_l1(space, data, mode, cfg,
                                                  enum_cap=opt.get("enum_cap"))
        io.save_model(out, model)
        print(f"ug-{mode} fit: active_pairs={len(active)} -> {out}")
    return 0


def _cmd_eval(opt) -> int:
    model = io.load_model(opt.get("model", "model.json"))
    data = _load_dataset(opt)
    value = baselines.eval_test_nll(model, data, enum_cap=opt.get("enum_cap"))
    print(repr(value))
    return 0


def _cmd_infer(opt) -> int:
    model = io.load_model(opt.get("model", "model.json"))
    if not isinstance(model, Model):
        raise ValidationError("infer requires a dcg model")
    query_nodes = _parse_nodes(opt.get("query", ""))
    table = inference.query(model, query_nodes,
                            observe=_parse_assignments(opt.get("observe", "")),
                            do=_parse_assignments(opt.get("do", "")),
                            enum_cap=opt.get("enum_cap"))
    out = opt.get("out")
    io.write_table(out if out else sys.stdout, table)
    return 0


def _cmd_sample(opt) -> int:
    model = io.load_model(opt.get("model", "model.json"))
    if not isinstance(model, Model):
        raise ValidationError("sample requires a dcg model")
    count = int(opt.get("count", 100))
    do = _parse_assignments(opt.get("do", ""))
    seed = int(opt.get("seed", 0))
    if opt.get("gibbs"):
        cfg = inference.GibbsConfig(sweeps=count,
                                    burn_in=int(opt.get("burn_in", 1000)),
                                    seed=seed)
        samples = inference.gibbs_sample(model, cfg, do=do)
    else:
        samples = inference.exact_sample(model, count, seed=seed, do=do,
                                         enum_cap=opt.get("enum_cap"))
    out = opt.get("out", "samples.csv")
    io.write_samples(out, samples)
    print(f"wrote {samples.shape[0]} samples to {out}")
    return 0


def _cmd_graph(opt) -> int:
    model = io.load_model(opt.get("model", "model.json"))
    if isinstance(model, baselines.UgModel):
        raise ValidationError("graph inspection expects a directed model")
    g = model.graph
    blanket_node = opt.get("blanket")
    if blanket_node is not None:
        nodes = sorted(markov_blanket(g, int(blanket_node)))
        print(" ".join(str(i) for i in nodes))
        return 0
    if opt.get("intervene") is not None:
        g = intervene_graph(g, _parse_nodes(opt.get("intervene")))
    if opt.get("moral"):
        for i, j in moralize(g).edges:
            print(f"{i} -- {j}")
    else:
        for p, c in g.edges:
            print(f"{p} -> {c}")
    return 0


def _cmd_experiment(opt) -> int:
    methods = tuple((opt.get("methods") or ",".join(METHODS)).split(","))
    lambda2 = float(opt.get("lambda2", 1e-4))
    n_lambdas = int(opt.get("n_lambdas", 20))
    tol = float(opt.get("tol", 1e-6))
    out = opt.get("out", "report.csv")
    if opt.get("data"):
        data = _load_dataset(opt)
        space = _space_for(opt, data)
        split_text = opt.get("split", "half-random")
        if split_text.startswith("first:"):
            train, test = split_first(data, int(split_text.split(":")[1]))
        elif split_text == "half-random":
            train, test = split_half_random(data, int(opt.get("seed", 0)))
        else:
            raise ValidationError("--split must be 'first:N' or 'half-random'")
        reports = [run_experiment(train, test, space, methods=methods,
                                  n_lambdas=n_lambdas, lambda2=lambda2,
                                  seed=int(opt.get("seed", 0)), tol=tol,
                                  enum_cap=opt.get("enum_cap"))]
    else:
        base = SynthConfig(n=int(opt.get("n", 10)),
                           edge_prob=float(opt.get("edge_prob", 0.5)),
                           m=int(opt.get("m", 1000)),
                           obs_fraction=float(opt.get("obs_fraction", 1.0 / 11.0)),
                           seed=int(opt.get("seed", 0)),
                           card=int(opt.get("card", 2) or 2))
        n_seeds = int(opt.get("seeds", 1))
        first = int(opt.get("seed", 0))
        reports = replicate(base, range(first, first + n_seeds), methods=methods,
                            n_lambdas=n_lambdas, lambda2=lambda2, tol=tol,
                            workers=int(opt.get("threads", 1)),
                            enum_cap=opt.get("enum_cap"))
    io.write_report_csv(out, reports)
    print(f"wrote report to {out}")
    for method, stats in summarize(reports).items():
        print(f"{method}: best test NLL {stats['mean_best_test_nll']:.4f} "
              f"+/- {stats['two_sd']:.4f} (2 sd over {stats['n_seeds']} seeds)")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "fit": _cmd_fit,
    "path": _cmd_path,
    "baseline": _cmd_baseline,
    "eval": _cmd_eval,
    "infer": _cmd_infer,
    "sample": _cmd_sample,
    "graph": _cmd_graph,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args.config)
        opt = _Options(args, config)
        logging.basicConfig(
            level=logging.INFO if opt.get("verbose") else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s")
        return _COMMANDS[args.command](opt)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except CapacityError as err:
        print(f"capacity error: {err}", file=sys.stderr)
        return 3
    except DcgError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
