"""dalkit: proof kernel, index reduction and trace lab for differential-algebraic programs."""

__version__ = "0.1.0"
