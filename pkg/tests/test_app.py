import json

import pytest

from opensystem.cli.app import (
    App,
    Command,
    Context,
    default_error_handlers,
    resolve_error_handler,
)
from opensystem.errors import (
    AlreadyRegisteredError,
    CommandNotFoundError,
    ConfigError,
    DomainError,
    OpenSystemError,
)


class BaseCustomError(Exception):
    pass


class SubCustomError(BaseCustomError):
    pass


@pytest.fixture
def app():
    app = App()
    default_error_handlers(app)
    return app


@pytest.fixture
def config_file(tmp_path):
    config = tmp_path / "scenario.yaml"
    config.write_text("seed: 1\nlog_level: WARNING\n")
    return config


def test_command_init__expect_name_and_description():
    async def evolve_all(ctx):
        """Evolve everything."""

    cmd = Command(evolve_all)

    assert cmd.name == "evolve_all"
    assert cmd.description == "Evolve everything."
    assert str(cmd) == "evolve_all"
    assert Command(evolve_all, name="custom", description="d").name == "custom"


def test_command_init_with_invalid_name__expect_type_error():
    async def evolve_all(ctx):
        pass

    with pytest.raises(TypeError):
        Command(evolve_all, name=123)


def test_command_init_with_plain_function__expect_type_error():
    def evolve_all(ctx):
        pass

    with pytest.raises(TypeError, match="coroutines"):
        Command(evolve_all)


def test_register_command_twice__expect_already_registered_error(app):
    @app.command()
    async def run(ctx):
        pass

    with pytest.raises(AlreadyRegisteredError):
        app.register_command(Command(run.callback))


def test_get_command_missing__expect_command_not_found_error(app):
    with pytest.raises(CommandNotFoundError, match="'nope' not found"):
        app.get_command("nope")


def test_error_with_plain_function__expect_type_error(app):
    with pytest.raises(TypeError, match="coroutines"):

        @app.error(ValueError)
        def on_error(error):
            return 1


def test_resolve_error_handler_with_exact_type_match__expect_handler_returned():
    def handler(error):
        pass

    handlers = {ValueError: handler}

    assert resolve_error_handler(handlers, ValueError("boom")) is handler


def test_resolve_error_handler_with_exception_subclass__expect_base_handler():
    def handler(error):
        pass

    handlers = {BaseCustomError: handler}

    assert resolve_error_handler(handlers, SubCustomError("boom")) is handler


def test_resolve_error_handler_with_no_matching_handler__expect_none_returned():
    def handler(error):
        pass

    assert resolve_error_handler({ValueError: handler}, TypeError("boom")) is None


def test_resolve_error_handler_with_specific_and_base__expect_specific_handler():
    def base_handler(error):
        pass

    def specific_handler(error):
        pass

    handlers = {BaseCustomError: base_handler, SubCustomError: specific_handler}

    assert resolve_error_handler(handlers, SubCustomError("boom")) is specific_handler


def test_resolve_error_handler_for_library_error__expect_library_handler():
    def handler(error):
        pass

    handlers = {OpenSystemError: handler}

    assert resolve_error_handler(handlers, DomainError("bad")) is handler


@pytest.mark.asyncio
async def test_run__expect_command_called_and_manifest_written(
    app, config_file, tmp_path
):
    @app.command()
    async def touch(ctx: Context) -> None:
        path = ctx.path("touched.txt")
        path.write_text(f"seed {ctx.seed}\n")
        ctx.record(path)

    out = tmp_path / "out"
    code = await app.run(
        ["touch", "--config", str(config_file), "--out", str(out), "--seed", "5"]
    )

    manifest = json.loads((out / "manifest.json").read_text())
    assert code == 0
    assert (out / "touched.txt").read_text() == "seed 5\n"
    assert manifest["command"] == "touch"
    assert manifest["seed"] == 5
    assert manifest["exit_code"] == 0
    assert list(manifest["files"]) == ["touched.txt"]


@pytest.mark.asyncio
async def test_run_without_out__expect_configured_directory(app, config_file):
    @app.command()
    async def touch(ctx: Context) -> None:
        pass

    code = await app.run(["touch", "--config", str(config_file)])

    assert code == 0
    assert (config_file.parent / "results" / "touch" / "manifest.json").exists()


@pytest.mark.asyncio
async def test_run_with_overrides__expect_config_updated(app, config_file, tmp_path):
    seen = {}

    @app.command()
    async def touch(ctx: Context) -> None:
        seen["sign"] = ctx.config["evolution"]["sign"]
        seen["exhaustive"] = ctx.config["unravel"]["exhaustive"]

    await app.run(
        ["touch", "--config", str(config_file), "--out", str(tmp_path), "--sign", "+"]
        + ["--exhaustive"]
    )

    assert seen == {"sign": 1, "exhaustive": True}


@pytest.mark.asyncio
async def test_run_with_missing_config__expect_exit_code_two(app, tmp_path):
    @app.command()
    async def touch(ctx: Context) -> None:
        pass

    code = await app.run(
        ["touch", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)]
    )

    assert code == 2
    assert not (tmp_path / "manifest.json").exists()


@pytest.mark.asyncio
async def test_run_with_library_error__expect_exit_code_one_in_manifest(
    app, config_file, tmp_path
):
    @app.command()
    async def fail(ctx: Context) -> None:
        raise DomainError("width must be positive")

    code = await app.run(["fail", "--config", str(config_file), "--out", str(tmp_path)])

    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert code == 1
    assert manifest["exit_code"] == 1


@pytest.mark.asyncio
async def test_run_with_config_error_in_command__expect_exit_code_two(
    app, config_file, tmp_path
):
    @app.command()
    async def fail(ctx: Context) -> None:
        raise ConfigError("hamiltonian.parameters.v1", "cannot read")

    code = await app.run(["fail", "--config", str(config_file), "--out", str(tmp_path)])

    assert code == 2


@pytest.mark.asyncio
async def test_run_with_unhandled_error__expect_exit_code_one(config_file, tmp_path):
    app = App()

    @app.command()
    async def fail(ctx: Context) -> None:
        raise RuntimeError("boom")

    code = await app.run(["fail", "--config", str(config_file), "--out", str(tmp_path)])

    assert code == 1


@pytest.mark.asyncio
async def test_run_with_custom_handler__expect_handler_exit_code(
    app, config_file, tmp_path
):
    @app.command()
    async def fail(ctx: Context) -> None:
        raise SubCustomError("boom")

    @app.error(BaseCustomError)
    async def on_custom(error: Exception) -> int:
        return 7

    code = await app.run(["fail", "--config", str(config_file), "--out", str(tmp_path)])

    assert code == 7


def test_parser_with_unknown_command__expect_system_exit(app):
    @app.command()
    async def touch(ctx: Context) -> None:
        pass

    with pytest.raises(SystemExit):
        app.parser().parse_args(["nope"])


def test_parser_version__expect_version_printed(app, capsys):
    with pytest.raises(SystemExit) as exc_info:
        app.parser().parse_args(["--version"])

    assert exc_info.value.code == 0
    assert capsys.readouterr().out.startswith("opensystem ")


def test_start__expect_exit_code(app, config_file, tmp_path):
    @app.command()
    async def touch(ctx: Context) -> None:
        pass

    argv = ["touch", "--config", str(config_file), "--out", str(tmp_path)]

    assert app.start(argv) == 0
