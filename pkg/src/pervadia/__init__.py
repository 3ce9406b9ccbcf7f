"""Pervadia: a persistent one-shard virtual world engine and simulation
harness for technology-sustained pervasive applications."""

__version__ = "0.1.0"
