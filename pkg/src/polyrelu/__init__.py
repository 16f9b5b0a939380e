"""polyrelu: compile functions on polytope domains into explicit ReLU
networks and verify the construction numerically."""

__version__ = "0.1.0"
