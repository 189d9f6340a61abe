"""Utility modules for ellipsoidpack."""

from ellipsoidpack.utils.config import RunConfig
from ellipsoidpack.utils.logging import setup_logger
from ellipsoidpack.utils.seeding import make_rng, stream_id

__all__ = ["RunConfig", "setup_logger", "make_rng", "stream_id"]
