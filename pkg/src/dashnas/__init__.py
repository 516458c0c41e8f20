"""Differentiable search over dilated convolutions with fast mixed-operation strategies.

Modules: ``tensor`` (reverse-mode autodiff, SGD), ``ops``, ``spectral`` (radix-2
FFT), ``mixedconv`` (AggConv strategies and the cost model), ``supernet``,
``tasks``, ``pipeline``, ``bench``, ``verify`` and ``cli``.
"""

from .mixedconv import (DilationImpl, KernelBank, MixStrategy, OpCountReport, SearchSpace, aggconv,
                        count_ops, crossover_analysis)
from .pipeline import (PipelineConfig, SearchConfig, TuneGrid, make_search_space, retrain,
                       run_full_pipeline, search, tune)
from .supernet import BackboneSpec, DiscretizedModel, SupernetModel, discretize
from .tensor import SGD, Tensor, backward, no_grad

__all__ = [
    "BackboneSpec", "DilationImpl", "DiscretizedModel", "KernelBank", "MixStrategy", "OpCountReport",
    "PipelineConfig", "SGD", "SearchConfig", "SearchSpace", "SupernetModel", "Tensor", "TuneGrid",
    "aggconv", "backward", "count_ops", "crossover_analysis", "discretize", "make_search_space",
    "no_grad", "retrain", "run_full_pipeline", "search", "tune",
]
__version__ = "0.1.0"
