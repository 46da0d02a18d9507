"""Exact and Monte Carlo simulation of weak-value and null-weak-value protocols."""

from .detector import DetectorParams
from .dsl import ProtocolSpec, parse, serialize, validate
from .hilbert import Ket, Observable, expectation, number_operator, project, qubit, tensor
from .nullprotocol import PartialCollapseSpec, bayes_null_conditional, null_weak_value
from .weakvalues import strong_decomposition, weak_value, wv_decomposition

__version__ = "0.1.0"

__all__ = [
    "DetectorParams",
    "Ket",
    "Observable",
    "PartialCollapseSpec",
    "ProtocolSpec",
    "bayes_null_conditional",
    "expectation",
    "null_weak_value",
    "number_operator",
    "parse",
    "project",
    "qubit",
    "serialize",
    "strong_decomposition",
    "tensor",
    "validate",
    "weak_value",
    "wv_decomposition",
]
