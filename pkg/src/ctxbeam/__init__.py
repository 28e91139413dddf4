"""Context-aware mmWave beam prediction: a synthetic V2I world, a masked
multimodal Transformer, and a tabular policy that decides which sensors to
pay for at each step."""

__version__ = "0.1.0"
