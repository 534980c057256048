"""Quality classification and Shapley explanations for CVRP solutions."""

__version__ = "0.1.0"
