import argparse
import asyncio
import inspect
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Coroutine, Dict, List, Optional, Sequence, TypeVar

from opensystem import __version__
from opensystem.cli.report import Component
from opensystem.config import Config
from opensystem.errors import (
    AlreadyRegisteredError,
    CommandError,
    CommandNotFoundError,
    ConfigError,
    OpenSystemError,
)
from opensystem.export import write_manifest
from opensystem.scenario import Scenario

logger = logging.getLogger(__name__)

Callback = Callable[["Context"], Coroutine[Any, Any, None]]
ErrorCallback = Callable[[Exception], Coroutine[Any, Any, int]]

F = TypeVar("F", bound=Callable[..., object])

SIGNS = {"+": 1, "-": -1}


def resolve_error_handler(
    handlers: Dict[type[Exception], F], error: Exception
) -> Optional[F]:
    """Look up the handler registered for the error's type or nearest base class."""
    for cls in inspect.getmro(type(error)):
        if cls in handlers:
            return handlers[cls]
    return None


class Command:
    """A named coroutine run against a `Context`."""

    def __init__(
        self,
        func: Callback,
        *,
        name: Optional[str] = None,
        description: Optional[str] = None,
    ):
        if name is not None and not isinstance(name, str):
            raise TypeError("Name must be a string.")
        if not inspect.iscoroutinefunction(func):
            raise TypeError("Commands must be coroutines")

        self.name: str = name or func.__name__
        self.callback = func
        self.description: str = description or inspect.getdoc(func) or ""

    async def __call__(self, ctx: "Context") -> None:
        await self.callback(ctx)

    def __str__(self) -> str:
        return self.name


class Context:
    """Everything a command needs: the validated config, where to write, and
    the list of artifacts written so far (they end up in the manifest).
    """

    def __init__(self, app: "App", command: Command, config: Config, out: Path):
        self.app = app
        self.command = command
        self.config = config
        self.out = out
        self.files: List[Path] = []
        self._scenario: Optional[Scenario] = None

    @property
    def logger(self) -> logging.Logger:
        return self.app.log.getChild(self.command.name)

    @property
    def seed(self) -> int:
        return int(self.config["seed"])

    @property
    def scenario(self) -> Scenario:
        if self._scenario is None:
            self._scenario = Scenario.from_config(self.config)
        return self._scenario

    def path(self, name: str) -> Path:
        return self.out / name

    def record(self, path: Path) -> Path:
        """Remember a written artifact for the manifest."""
        self.files.append(path)
        return path

    def show(self, component: Component) -> None:
        """Print a report, aligned on a terminal and plain when redirected."""
        if sys.stdout.isatty():
            print(component.render())
        else:
            print(component.to_plain_text())


class App:
    """Command registry and entry point of the `opensystem` executable.

    ## Example

    ```python
    app = App()

    @app.command(description="Evolve the configured scenario")
    async def run(ctx: Context) -> None:
        ...

    @app.error(ConfigError)
    async def on_config_error(error: Exception) -> int:
        return 2

    raise SystemExit(app.start(["run", "--config", "scenario.yaml"]))
    ```
    """

    def __init__(self, name: str = "opensystem"):
        self.name = name
        self.log = logging.getLogger(name)

        self._commands: Dict[str, Command] = {}
        self._error_handlers: Dict[type[Exception], ErrorCallback] = {}

    @property
    def commands(self) -> Dict[str, Command]:
        return self._commands

    def command(
        self, name: Optional[str] = None, *, description: Optional[str] = None
    ) -> Callable[[Callback], Command]:
        """Decorator to register a coroutine function as a command.

        The command name defaults to the function name unless explicitly
        provided.
        """

        def wrapper(func: Callback) -> Command:
            cmd = Command(func, name=name, description=description)
            return self.register_command(cmd)

        return wrapper

    def register_command(self, cmd: Command) -> Command:
        if cmd.name in self._commands:
            raise AlreadyRegisteredError("command", cmd.name)

        self._commands[cmd.name] = cmd
        logger.debug("command '%s' registered on %s", cmd, self.name)

        return cmd

    def get_command(self, name: str) -> Command:
        try:
            return self._commands[name]
        except KeyError:
            raise CommandNotFoundError(name) from None

    def error(
        self, exception: Optional[type[Exception]] = None
    ) -> Callable[[ErrorCallback], ErrorCallback]:
        """Decorator to register an error handler returning the exit code.

        Handlers are looked up along the exception's MRO, so a handler for
        `OpenSystemError` also catches every library error without a more
        specific one. Without an exception type the handler is the fallback.
        """

        def wrapper(func: ErrorCallback) -> ErrorCallback:
            if not inspect.iscoroutinefunction(func):
                raise TypeError("Error handlers must be coroutines")

            self._error_handlers[exception or Exception] = func
            logger.debug("registered error handler '%s'", func.__name__)
            return func

        return wrapper

    def parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(
            prog=self.name,
            description="Simulate a quantum system coupled to one environment mode.",
        )
        parser.add_argument(
            "--version", action="version", version=f"%(prog)s {__version__}"
        )
        parser.add_argument(
            "command",
            choices=sorted(self._commands),
            help="what to compute",
        )
        parser.add_argument("--config", type=Path, help="scenario YAML file")
        parser.add_argument("--seed", type=int, help="override the configured seed")
        parser.add_argument("--out", type=Path, help="output directory")
        parser.add_argument(
            "--sign",
            choices=sorted(SIGNS),
            help="time convention: '-' for exp(-itH), '+' for exp(+itH)",
        )
        parser.add_argument(
            "--exhaustive",
            action="store_true",
            default=None,
            help="enumerate every environment outcome instead of sampling",
        )
        return parser

    def _load_config(self, args: argparse.Namespace) -> Config:
        config = Config(args.config)
        return config.with_overrides(
            seed=args.seed,
            sign=SIGNS[args.sign] if args.sign else None,
            exhaustive=args.exhaustive,
        )

    def _output_dir(self, args: argparse.Namespace, config: Config) -> Path:
        if args.out is not None:
            return Path(args.out)

        directory = Path(config.get("directory", section="outputs"))
        if not directory.is_absolute():
            directory = config.base_dir / directory
        return directory / args.command

    async def _on_error(self, error: Exception) -> int:
        if handler := resolve_error_handler(self._error_handlers, error):
            return await handler(error)

        self.log.exception("Unhandled error: '%s'", error)
        return 1

    async def run(self, argv: Optional[Sequence[str]] = None) -> int:
        """Parse `argv`, run the selected command and write its manifest.

        The manifest is written whenever the command got to start, so a
        failed run still records the artifacts it produced and its exit code.
        """
        args = self.parser().parse_args(argv)
        ctx: Optional[Context] = None

        try:
            config = self._load_config(args)
            logging.basicConfig(level=config["log_level"])

            cmd = self.get_command(args.command)
            out = self._output_dir(args, config)
            out.mkdir(parents=True, exist_ok=True)

            ctx = Context(self, cmd, config, out)
            self.log.info("running '%s' into %s", cmd, out)
            await cmd(ctx)
        except Exception as error:
            code = await self._on_error(error)
        else:
            code = 0

        if ctx is not None:
            write_manifest(
                ctx.path("manifest.json"),
                config_digest=ctx.config.digest(),
                seed=ctx.seed,
                version=__version__,
                command=ctx.command.name,
                files=ctx.files,
                extra={"exit_code": code},
            )

        return code

    def start(self, argv: Optional[Sequence[str]] = None) -> int:
        """Synchronous entry point returning the process exit code."""
        try:
            return asyncio.run(self.run(argv))
        except KeyboardInterrupt:
            self.log.info("interrupted by user")
            return 130


def default_error_handlers(app: App) -> None:
    """Exit code 2 for configuration and usage errors, 1 for everything else."""

    @app.error(ConfigError)
    async def on_config_error(error: Exception) -> int:
        app.log.error("%s", error)
        return 2

    @app.error(CommandError)
    async def on_command_error(error: Exception) -> int:
        app.log.error("%s", error)
        return 2

    @app.error(OpenSystemError)
    async def on_library_error(error: Exception) -> int:
        app.log.error("%s", error)
        return 1
