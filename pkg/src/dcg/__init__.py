"""Directed cyclic graphical models for discrete interventional data.

Globally normalized products of per-node potentials over an arbitrary
directed graph: exact inference and sampling under observation and
intervention, Gibbs sampling, convex MAP estimation, group-sparse
structure learning, and DAG/undirected comparison models.
"""

from .backend import get_backend, set_backend
from .baselines import (DagModel, UgModel, dag_fit_ordering, dag_nll_grad,
                        dag_order_search, eval_test_nll, ug_fit_group_l1,
                        ug_fit_map, ug_lambda_max, ug_nll_grad)
from .errors import (CapacityError, DcgError, DegenerateEvidenceError,
                     ValidationError)
from .estimation import (Dataset, FitConfig, FitResult, finite_diff_gradient,
                         fit_map, nll_grad, pseudo_nll_grad)
from .experiments import (SynthConfig, generate_synthetic, replicate,
                          run_experiment, split_first, split_half_random,
                          summarize)
from .graphs import (UndirectedGraph, intervene_graph, is_acyclic, is_separated,
                     markov_blanket, moralize, topological_order)
from .inference import (DistributionTable, GibbsConfig, exact_sample,
                        gibbs_sample, local_conditional, query)
from .io import ingest_dataset, load_model, save_model
from .model import (DirectedGraph, Intervention, Model, Parameters, StateSpace,
                    random_graph, random_model)
from .structure import (ConeState, GroupL1Config, RegPathPoint, RegPathResult,
                        default_lambda_grid, fit_group_l1, lambda_max,
                        project_cone, reg_path)
from .tables import TableModel

__version__ = "0.1.0"

__all__ = [
    "CapacityError", "ConeState", "DagModel", "Dataset", "DcgError",
    "DegenerateEvidenceError", "DirectedGraph", "DistributionTable",
    "FitConfig", "FitResult", "GibbsConfig", "GroupL1Config", "Intervention",
    "Model", "Parameters", "RegPathPoint", "RegPathResult", "StateSpace",
    "SynthConfig", "TableModel", "UgModel", "UndirectedGraph",
    "ValidationError", "dag_fit_ordering", "dag_nll_grad", "dag_order_search",
    "default_lambda_grid", "eval_test_nll", "exact_sample",
    "finite_diff_gradient", "fit_group_l1", "fit_map", "generate_synthetic",
    "get_backend", "gibbs_sample", "ingest_dataset", "intervene_graph",
    "is_acyclic", "is_separated", "lambda_max", "load_model",
    "local_conditional", "markov_blanket", "moralize", "nll_grad",
    "project_cone", "pseudo_nll_grad", "query", "random_graph", "random_model",
    "reg_path", "replicate", "run_experiment", "save_model", "set_backend",
    "split_first", "split_half_random", "summarize", "topological_order",
    "ug_fit_group_l1", "ug_fit_map", "ug_lambda_max", "ug_nll_grad",
]
