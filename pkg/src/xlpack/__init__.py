"""Bilingual corpus construction: dump parsing, article alignment, context
packing, sliding-window batching, retrieval augmentation, and shard export."""

__version__ = "0.1.0"
