"""Instance-aware parameter configuration for bilevel LAHC on the E-CVRP."""

__version__ = "0.1.0"
