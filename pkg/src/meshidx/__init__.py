"""Full-text MeSH indexing: corpus construction, a document/label-graph model, evaluation."""

__version__ = "0.1.0"
