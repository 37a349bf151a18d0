"""choreo: live-coding compiler and runtime for movement scores."""

__version__ = "0.1.0"
