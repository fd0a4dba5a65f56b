"""The `opensystem` command-line front end."""

from typing import Optional, Sequence

from .app import App, Command, Context
from .commands import app
from .report import Table


def main(argv: Optional[Sequence[str]] = None) -> int:
    return app.start(argv)


__all__ = ["App", "Command", "Context", "Table", "app", "main"]
