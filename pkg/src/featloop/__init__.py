"""featloop: LLM-guided automated feature engineering for multi-label
tabular classification."""

__version__ = "0.1.0"
