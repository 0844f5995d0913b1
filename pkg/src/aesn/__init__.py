"""Echo state networks with an areal random input representation."""

__version__ = "0.1.0"
