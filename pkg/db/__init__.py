"""
On-disk artefacts: channel test sets, model checkpoints and result tables.
"""
