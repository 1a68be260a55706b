"""RL fine-tuning of a small autoregressive policy for code performance
optimization, with rewards from actually executing generated programs
against unit tests."""

__version__ = "0.1.0"
