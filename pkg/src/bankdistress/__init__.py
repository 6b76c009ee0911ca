"""Two-stage bank-distress classification from news text and financial indicators.

Pipeline: entity-bearing sentence extraction -> distributed-memory paragraph
vectors -> fusion with quarterly indicators -> feed-forward classifier trained
with Nesterov momentum -> usefulness-based early-warning evaluation.
"""

from . import corpus, evaluation, experiment, fusion, neural, pvdm, synth

__all__ = ["corpus", "evaluation", "experiment", "fusion", "neural", "pvdm", "synth"]

__version__ = "0.1.0"
