"""Gated graph-convolutional event detection on dependency trees."""

from .config import TrainConfig
from .corpus import Sentence, build_graph, graph_distances, parse_corpus, read_corpus
from .model import GatedGCN
from .tensor import Tape, Tensor

__version__ = "0.1.0"

__all__ = ["GatedGCN", "Sentence", "Tape", "Tensor", "TrainConfig", "build_graph",
           "graph_distances", "parse_corpus", "read_corpus"]
