"""Post-processing bias correction for storm-surge forecasts.

Learns the offset (modeled minus observed water level) time series at gauge
stations with a Conv1D+LSTM network and subtracts predicted offsets from the
physics-model output.
"""

from . import metrics, model, nn, pipeline, synth, wilcoxon

__version__ = "0.1.0"

__all__ = ["metrics", "model", "nn", "pipeline", "synth", "wilcoxon", "__version__"]
