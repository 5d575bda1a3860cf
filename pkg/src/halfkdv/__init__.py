"""Half-line KdV soliton laboratory."""

__version__ = "0.1.0"
