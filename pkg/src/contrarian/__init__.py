"""Mean-field contrarian voter model with Erlang-delayed information."""

__version__ = "0.1.0"
