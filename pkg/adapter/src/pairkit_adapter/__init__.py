"""pairkit-adapter: turn encoder outputs into pairkit's file formats.

The adapter is the only component that may depend on ML frameworks; it
talks to the curation/scoring toolkit exclusively through files (EMB1
embeddings, JSONL manifests and task records), keeping that boundary a
bit-exact format contract.
"""

__version__ = "0.1.0"
