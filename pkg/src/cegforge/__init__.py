"""Bayesian chain event graph modelling for categorical event data.

Workflow: load a CSV, grow an event tree, prune impossible branches,
colour situations into stages (by hand or greedy Bayes-factor merging),
attach Dirichlet priors, fold in the observed counts, contract to a
chain event graph, then score, compare, filter, and map the result.
"""

from .ceg import (
    CEGModel,
    ComparisonResult,
    ModelSummary,
    SINK_ID,
    UpdateTable,
    compare_ceg_models,
    contract_to_ceg,
    create_reduced_ceg,
    posterior_update,
    summarize_ceg,
    summarize_stage_models,
    update_table,
)
from .dataset import (
    Dataset,
    TimeSpec,
    designate,
    filter_rows,
    load_csv,
    select_columns,
)
from .errors import (
    CegError,
    ConfigurationError,
    ConflictError,
    IncompleteError,
    ParseError,
    UnknownNameError,
    ValidationError,
)
from .event_tree import (
    EventTree,
    create_event_tree,
    delete_nodes,
    summarize_tree,
)
from .priors import (
    PriorTable,
    StagedTreeModel,
    dirichlet_moments,
    phantom_allocation,
    prior_table_skeleton,
    specify_priors,
    staged_tree_prior,
)
from .spatial import (
    AreaMap,
    AreaProbabilityTable,
    area_probabilities,
    colour_for_value,
    load_geo,
    match_areas,
    render_map_document,
)
from .staging import (
    StageModel,
    Staging,
    assign_stages,
    initial_staging,
    log_marginal_stage,
    merge_score,
    palette_colours,
    run_ahc,
    summarize_staging,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "CegError",
    "ParseError",
    "ValidationError",
    "UnknownNameError",
    "ConfigurationError",
    "IncompleteError",
    "ConflictError",
    # data
    "Dataset",
    "TimeSpec",
    "load_csv",
    "select_columns",
    "designate",
    "filter_rows",
    # tree
    "EventTree",
    "create_event_tree",
    "delete_nodes",
    "summarize_tree",
    # staging
    "Staging",
    "StageModel",
    "initial_staging",
    "assign_stages",
    "run_ahc",
    "log_marginal_stage",
    "merge_score",
    "palette_colours",
    "summarize_staging",
    # priors
    "PriorTable",
    "StagedTreeModel",
    "specify_priors",
    "prior_table_skeleton",
    "phantom_allocation",
    "staged_tree_prior",
    "dirichlet_moments",
    # ceg
    "SINK_ID",
    "CEGModel",
    "ModelSummary",
    "ComparisonResult",
    "UpdateTable",
    "posterior_update",
    "contract_to_ceg",
    "create_reduced_ceg",
    "summarize_ceg",
    "summarize_stage_models",
    "compare_ceg_models",
    "update_table",
    # spatial
    "AreaMap",
    "AreaProbabilityTable",
    "load_geo",
    "match_areas",
    "area_probabilities",
    "colour_for_value",
    "render_map_document",
]
