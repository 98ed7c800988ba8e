"""Game-theoretic RAN slicing: MVNOs splitting demand over shared RRHs."""

__version__ = "0.1.0"
