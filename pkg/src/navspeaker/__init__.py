"""navspeaker: trajectory-to-instruction generation in synthetic houses."""

__version__ = "0.1.0"
