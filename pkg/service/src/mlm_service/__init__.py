"""Model backend for masked-token scoring, embeddings, and token importance.

Serves per-source fine-tuned masked language models, a pooled domain model,
the plain base model, and a source classifier behind a JSON HTTP protocol,
plus toy-scale training scripts that produce and register the artifacts.
"""

__version__ = "0.1.0"
