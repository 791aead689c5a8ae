"""Sharp bounds, testable implications and inference for principal strata."""

__version__ = "0.1.0"

from .empirics import DataError, ObservedDistribution, read_csv
from .idset import BoundResult, check_consistency, identified_set, testable_implications
from .inference import TestConfig, confidence_region, specification_test, test
from .linsys import build_A
from .model import ModelError, ParameterSpec, StrataModel, Support, catalog, standard_parameters
from .modelfile import load_model

__all__ = [
    "BoundResult", "DataError", "ModelError", "ObservedDistribution", "ParameterSpec", "StrataModel",
    "Support", "TestConfig", "build_A", "catalog", "check_consistency", "confidence_region",
    "identified_set", "load_model", "read_csv", "specification_test", "standard_parameters", "test",
    "testable_implications",
]
