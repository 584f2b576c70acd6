"""TCP front end dispatching envelopes to the query engine."""

from .config import ServerConfig, load_config
from .core import Server, serve

__all__ = ["Server", "ServerConfig", "load_config", "serve"]
