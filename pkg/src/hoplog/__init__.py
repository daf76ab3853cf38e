"""Type checker, proof kernel and exact semantic oracle for higher-order probabilistic program logics."""

__version__ = "0.1.0"
