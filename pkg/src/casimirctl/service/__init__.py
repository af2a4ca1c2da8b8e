"""HTTP service exposing the training/simulation/verification pipeline."""

from .app import app, create_app

__all__ = ["app", "create_app"]
