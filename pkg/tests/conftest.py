"""Keeps this directory importable so tests can share graphs/oracles helpers."""
