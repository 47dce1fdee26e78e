"""fairlens: synthetic multimodal hiring testbed for fairness auditing."""
