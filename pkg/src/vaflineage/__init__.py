"""Multi-sample cancer lineage inference from somatic variant allele frequencies."""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    BinaryProfile,
    Cluster,
    SampleSet,
    SnvRecord,
    TernaryProfile,
    covers,
    hamming_weight,
    ternary_compatible,
)
