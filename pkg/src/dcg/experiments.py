"""End-to-end experiment harness.

Generates interventional data from random cyclic models, runs every
requested method across a regularization grid on a shared train/test
split, and collects plot-ready rows. The replication helper repeats the
whole pipeline over seeds and reports mean +/- two standard deviations of
each method's best held-out score.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import exact, optimize
from .baselines import (UgModel, build_ug_objective, dag_order_search,
                        eval_test_nll, ug_fit_group_l1, ug_lambda_max,
                        _fit_node, _node_layout, _node_rows)
from .backend import kernels
from .errors import CapacityError, ValidationError
from .estimation import Dataset
from .inference import GibbsConfig, exact_sample, gibbs_sample
from .model import (DirectedGraph, Intervention, Model, Parameters, StateSpace,
                    random_graph)
from .structure import GroupL1Config, default_lambda_grid, lambda_max, reg_path

log = logging.getLogger("dcg")

METHODS = ("dcg", "dag", "ug-observe", "ug-condition")


@dataclass(frozen=True)
class SynthConfig:
    """Random-model generation protocol: directed edges appear independently
    with ``edge_prob``; biases and weights are standard normal; each row is
    observational with probability ``obs_fraction``, otherwise one uniformly
    chosen node is clamped to a uniformly chosen state."""

    n: int = 10
    edge_prob: float = 0.5
    m: int = 1000
    obs_fraction: float = 1.0 / 11.0
    seed: int = 0
    card: int = 2

    def __post_init__(self):
        if not (0.0 <= self.edge_prob <= 1.0):
            raise ValidationError("edge_prob must be in [0, 1]")
        if not (0.0 < self.obs_fraction <= 1.0):
            raise ValidationError("obs_fraction must be in (0, 1]")
        if self.n < 1 or self.m < 1 or self.card < 2:
            raise ValidationError("need n >= 1, m >= 1, card >= 2")


def generate_synthetic(cfg: SynthConfig, enum_cap: int | None = None,
                       gibbs_fallback: bool = False,
                       gibbs_burn_in: int = 5000) -> tuple[Model, Dataset]:
    """Draw (true model, dataset). Fixed draw order per seed: graph edges,
    then parameters, then per row the regime choice followed by one sampling
    uniform (or a Gibbs chain seed when the fallback is enabled)."""
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    space = StateSpace.uniform(cfg.n, cfg.card)
    graph = random_graph(cfg.n, cfg.edge_prob, rng)
    model = Model(space, graph, Parameters.random(space, graph, rng))

    use_gibbs = False
    try:
        exact.build_plan(model.layout, enum_cap=enum_cap)
    except CapacityError:
        if not gibbs_fallback:
            raise
        use_gibbs = True

    cdf_cache: dict[tuple, tuple] = {}

    def row_probs(do: Intervention):
        key = do.items
        hit = cdf_cache.get(key)
        if hit is None:
            plan = model.plan(do, enum_cap=enum_cap)
            cdf = np.cumsum(exact.probabilities(exact.scores(model.theta, plan)))
            hit = (plan, cdf)
            cdf_cache[key] = hit
        return hit

    X = np.zeros((cfg.m, cfg.n), np.int64)
    mask = np.zeros((cfg.m, cfg.n), bool)
    for d in range(cfg.m):
        if rng.random() < cfg.obs_fraction:
            do = Intervention.empty()
        else:
            node = int(rng.integers(0, cfg.n))
            value = int(rng.integers(0, space.card[node]))
            do = Intervention(((node, value),))
            mask[d, node] = True
        if use_gibbs:
            chain_seed = int(rng.integers(0, 2 ** 63 - 1))
            chain = gibbs_sample(model, GibbsConfig(sweeps=1, burn_in=gibbs_burn_in,
                                                    seed=chain_seed), do=do)
            X[d] = chain[-1]
        else:
            plan, cdf = row_probs(do)
            u = rng.random()
            idx = min(int(np.searchsorted(cdf, u, side="left")), cdf.shape[0] - 1)
            X[d] = exact.decode_configs(plan, np.array([idx], np.int64), cfg.n,
                                        do.as_dict())[0]
    return model, Dataset(X, mask)


def split_first(data: Dataset, m_train: int) -> tuple[Dataset, Dataset]:
    if not (0 < m_train < data.m):
        raise ValidationError(f"train size {m_train} out of range for {data.m} rows")
    return data.subset(np.arange(m_train)), data.subset(np.arange(m_train, data.m))


def split_half_random(data: Dataset, seed: int) -> tuple[Dataset, Dataset]:
    rng = np.random.Generator(np.random.PCG64(seed))
    perm = rng.permutation(data.m)
    half = data.m // 2
    return data.subset(perm[:half]), data.subset(perm[half:])


@dataclass
class ReportRow:
    method: str
    seed: int
    lam: float
    n_edges: int
    train_nll: float
    test_nll: float


@dataclass
class ExperimentReport:
    rows: list[ReportRow]
    seed: int
    config: dict
    timings: dict[str, float]

    def best(self, method: str) -> ReportRow:
        rows = [r for r in self.rows if r.method == method]
        if not rows:
            raise ValidationError(f"no rows for method {method!r}")
        return min(rows, key=lambda r: (r.test_nll, r.lam))

    def methods(self) -> list[str]:
        seen = dict.fromkeys(r.method for r in self.rows)
        return list(seen)


def dag_lambda_max(space: StateSpace, data: Dataset, lambda2: float = 1e-4) -> float:
    """Largest per-(child, parent) gradient block norm at the bias-only fit.

    At zero weights the block for parent j of child i does not depend on the
    other candidate parents, so this bound is ordering-independent.
    """
    worst = 0.0
    cfg = GroupL1Config(lam=0.0, lambda2=lambda2, tol=1e-8, max_iter=5000)
    for i in range(space.n):
        parents = tuple(j for j in range(space.n) if j != i)
        bias_theta, _, _ = _fit_node(space, i, (), data, 0.0, lambda2, cfg)
        k, p_cards, w_off, dim = _node_layout(space, i, parents)
        theta = np.zeros(dim)
        theta[:k] = bias_theta[:k]
        xi, xp = _node_rows(data, i, parents)
        grad = np.zeros(dim)
        kernels().softmax_regression_accumulate(theta, k, p_cards, w_off, xi, xp, grad)
        grad += 2.0 * lambda2 * theta
        for t in range(len(parents)):
            worst = max(worst, float(np.linalg.norm(
                grad[w_off[t]:w_off[t] + k * p_cards[t]])))
    return worst


def _method_grid(lam_max: float, lambdas, n_lambdas: int) -> np.ndarray:
    if isinstance(lambdas, str) and lambdas == "auto":
        return default_lambda_grid(lam_max, n_lambdas)
    return np.asarray(lambdas, float)


def run_experiment(train: Dataset, test: Dataset, space: StateSpace,
                   methods=METHODS, lambdas="auto", n_lambdas: int = 20,
                   lambda2: float = 1e-4, seed: int = 0, tol: float = 1e-6,
                   max_iter: int = 2000, n_cap: int = 10,
                   enum_cap: int | None = None) -> ExperimentReport:
    """Sweep every method over its grid; all methods see identical splits."""
    rows: list[ReportRow] = []
    timings: dict[str, float] = {}
    for method in methods:
        if method not in METHODS:
            raise ValidationError(f"unknown method {method!r}; expected one of {METHODS}")
        t0 = time.perf_counter()
        if method == "dcg":
            graph = DirectedGraph.complete(space.n)
            lam_max = lambda_max(space, graph, train, lambda2, enum_cap)
            grid = _method_grid(lam_max, lambdas, n_lambdas)
            cfg = GroupL1Config(lam=0.0, lambda2=lambda2, tol=tol, max_iter=max_iter)
            path = reg_path(space, graph, train, grid, cfg, test=test,
                            enum_cap=enum_cap)
            for pt in path.points:
                rows.append(ReportRow(method, seed, pt.lam, len(pt.active_edges),
                                      pt.train_nll, pt.test_nll))
        elif method in ("ug-observe", "ug-condition"):
            mode = method.split("-")[1]
            lam_max = ug_lambda_max(space, train, mode, lambda2, enum_cap=enum_cap)
            grid = _method_grid(lam_max, lambdas, n_lambdas)
            init = None
            for lam in grid:
                cfg = GroupL1Config(lam=float(lam), lambda2=lambda2, tol=tol,
                                    max_iter=max_iter)
                model, active = ug_fit_group_l1(space, train, mode, cfg, init=init,
                                                enum_cap=enum_cap)
                init = model.params
                rows.append(ReportRow(method, seed, float(lam), len(active),
                                      eval_test_nll(model, train, enum_cap),
                                      eval_test_nll(model, test, enum_cap)))
        else:
            lam_max = dag_lambda_max(space, train, lambda2)
            grid = _method_grid(lam_max, lambdas, n_lambdas)
            warm: dict = {}
            for lam in grid:
                cfg = GroupL1Config(lam=float(lam), lambda2=lambda2, tol=tol,
                                    max_iter=max_iter)
                model, _score = dag_order_search(space, train, float(lam), lambda2,
                                                 n_cap=n_cap, cfg=cfg, warm_cache=warm)
                rows.append(ReportRow(method, seed, float(lam),
                                      len(model.graph.edges),
                                      eval_test_nll(model, train, enum_cap),
                                      eval_test_nll(model, test, enum_cap)))
        timings[method] = time.perf_counter() - t0
        log.info("method=%s seed=%d done in %.2fs", method, seed, timings[method])
    config = dict(methods=tuple(methods), lambdas=str(lambdas), n_lambdas=n_lambdas,
                  lambda2=lambda2, tol=tol, n_train=train.m, n_test=test.m)
    return ExperimentReport(rows=rows, seed=seed, config=config, timings=timings)


def _replicate_cell(args) -> ExperimentReport:
    cfg, methods, n_lambdas, lambda2, tol, max_iter, train_m, enum_cap = args
    from dcg import __version__

    t0 = time.perf_counter()
    _model, data = generate_synthetic(cfg, enum_cap=enum_cap)
    train, test = split_first(data, train_m)
    report = run_experiment(train, test, StateSpace.uniform(cfg.n, cfg.card),
                            methods=methods, n_lambdas=n_lambdas, lambda2=lambda2,
                            seed=cfg.seed, tol=tol, max_iter=max_iter,
                            enum_cap=enum_cap)
    log.info("seed=%d version=%s config=%s wall=%.2fs",
             cfg.seed, __version__, report.config, time.perf_counter() - t0)
    return report


def replicate(base: SynthConfig, seeds, methods=METHODS, n_lambdas: int = 20,
              lambda2: float = 1e-4, tol: float = 1e-6, max_iter: int = 2000,
              train_fraction: float = 0.5, workers: int = 1,
              enum_cap: int | None = None) -> list[ExperimentReport]:
    """One full experiment per seed; deterministic regardless of workers."""
    train_m = int(round(base.m * train_fraction))
    cells = [(replace(base, seed=int(s)), tuple(methods), n_lambdas, lambda2,
              tol, max_iter, train_m, enum_cap) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_replicate_cell, cells))
    else:
        reports = [_replicate_cell(c) for c in cells]
    return sorted(reports, key=lambda r: r.seed)


def summarize(reports) -> dict[str, dict[str, float]]:
    """Per method: mean and two standard deviations of the best test NLL."""
    out: dict[str, dict[str, float]] = {}
    methods = reports[0].methods() if reports else []
    for method in methods:
        best = np.array([r.best(method).test_nll for r in reports])
        out[method] = {
            "mean_best_test_nll": float(best.mean()),
            "two_sd": float(2.0 * best.std(ddof=1)) if best.size > 1 else 0.0,
            "n_seeds": int(best.size),
        }
    return out
