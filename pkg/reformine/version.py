"""Application version metadata."""

APP_NAME = "reformine"
__version__ = "0.1.0"
