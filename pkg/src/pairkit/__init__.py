"""pairkit: curation and benchmark scoring for image-caption pair datasets.

The toolkit is organized around line-delimited pair manifests and a compact
binary embedding format. Curation covers similarity filtering, caption
transfer through a pluggable text-generation backend, top-k sparsified
one-to-one matching, caption dedup, and seeded dataset composition. Scoring
covers 4-AFC classification, two-word 2-AFC, image/phrase-context group
scores, and METEOR captioning.
"""

__version__ = "0.1.0"
