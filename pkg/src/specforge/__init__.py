"""specforge: layered call-graph specification generation, Hoare-style
checking against those specifications, and test-case-driven bug validation,
with a deterministic bounded oracle standing in for the language model."""

from .codebase import (
    Codebase,
    FunctionRecord,
    callees_of,
    codebase_to_manifest,
    load_callgraph_manifest,
    parse_minilang_module,
    save_callgraph_manifest,
)
from .oracle import (
    BoundedDomain,
    NonTerminated,
    Returned,
    RuntimeFault,
    check_entailment_bounded,
    check_invariant_bounded,
    eval_function,
    satisfying_states,
    strongest_post,
)
from .planner import (
    BatchPlan,
    CallGraph,
    CondensedGraph,
    LayerPlan,
    Scc,
    condense_graph,
    construct_call_graph,
    find_sccs,
    make_batches,
    partition_phases,
    plan_layers,
)
from .specmodel import (
    Condition,
    DomainKnowledge,
    ExpectedSpecification,
    SpecFile,
    Specification,
    combine_expected_specs,
    parse_spec_file,
    render_spec_file,
    route_domain_knowledge,
)

__version__ = "0.1.0"
