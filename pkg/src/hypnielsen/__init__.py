"""Nielsen reduction for generating tuples of isometries of hyperbolic spaces."""

__version__ = "0.1.0"
