"""synthact: synthetic human-action clips with randomized nuisance factors.

Pipeline: motion capture conversion -> nuisance randomization -> capsule
rendering with groundtruth -> dataset generation -> classifier training
(including domain-adversarial and finetuning strategies) -> evaluation.
"""

__version__ = "0.1.0"
