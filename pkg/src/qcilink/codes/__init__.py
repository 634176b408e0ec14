"""Bundled parity-check code assets (alist format)."""
