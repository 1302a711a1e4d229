"""Transition-chain architecture search engine (Python bindings)."""

from ._core import (  # noqa: F401
    Architecture,
    ArchError,
    ChainError,
    Layer,
    ParseError,
    SearchConfig,
    TransitionChain,
    __version__,
    build_chain,
    canonical_hash,
    export_dot,
    infer_shapes,
    load_architecture,
    load_descriptions,
    param_count,
    registry_json,
    parse_architecture,
    run_search,
    serialize_architecture,
    surrogate_evaluate,
    validate_architecture,
)
