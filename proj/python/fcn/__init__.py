"""Oblivious neural-network inference over FV ciphertexts."""

from ._core import (
    CapacityError,
    ModelError,
    Network,
    Params,
    ParseError,
    Session,
    WeightsFormatError,
    eval_plain,
    fit_activation,
    load_params,
    load_weights,
    mnist_configs,
    parse_params,
    project_hops,
    save_weights,
    sparsity,
    weights_from_bytes,
)

__all__ = [
    "CapacityError",
    "ModelError",
    "Network",
    "Params",
    "ParseError",
    "Session",
    "WeightsFormatError",
    "eval_plain",
    "fit_activation",
    "load_params",
    "load_weights",
    "mnist_configs",
    "parse_params",
    "project_hops",
    "save_weights",
    "sparsity",
    "weights_from_bytes",
]
