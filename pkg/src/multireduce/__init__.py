"""Multiclass reductions to halfspaces: codes, trees, MSVM, and the tools to compare them."""

from .codes import CodeMatrix, ap_code, decode, ova_code, random_code, sensitive_vector, sensitivity
from .errors import (BudgetExceededError, EmbeddingInvalidError, MultireduceError,
                     NoSensitiveVectorError, NotRealizableError, ToleranceUnachievableError)
from .halfspace import BinarySample, Halfspace, exact_best_error
from .reducers import EcocModel, MulticlassSample, TreeModel, WeightMatrix
from .trees import TreeShape

__version__ = "0.1.0"

__all__ = [
    "BinarySample", "BudgetExceededError", "CodeMatrix", "EcocModel", "EmbeddingInvalidError",
    "Halfspace", "MulticlassSample", "MultireduceError", "NoSensitiveVectorError",
    "NotRealizableError", "ToleranceUnachievableError", "TreeModel", "TreeShape", "WeightMatrix",
    "ap_code", "decode", "exact_best_error", "ova_code", "random_code", "sensitive_vector",
    "sensitivity",
]
