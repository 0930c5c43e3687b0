"""HTTP facade over the run orchestration layer."""

from .app import create_app

__all__ = ["create_app"]
