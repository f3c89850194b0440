"""silk: mine silver-standard keyphrases from citation contexts and emit
confidence-ranked synthetic samples for domain adaptation, with the full
evaluation kit for keyphrase prediction."""

__version__ = "0.1.0"
