"""xlft: cross-lingual fine-tuning strategies on a desk-scale classifier.

Implements and verifies three training strategies: a similarity-prior loss
over the label space, task-specific sparse fine-tuning via iterative
magnitude pruning with rewinding, and code-mixing data augmentation,
together with the matching evaluation protocol (synonym-adjusted accuracy,
confusion analysis, multi-seed aggregation).
"""

__version__ = "0.1.0"
