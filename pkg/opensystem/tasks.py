import asyncio
from typing import Any, Awaitable, Callable, Iterable, TypeVar

from .errors import OpenSystemError

R = TypeVar("R")


async def run_blocking(
    func: Callable[..., R], /, *args: Any, error_message: str
) -> R:
    """Run a CPU-bound `func(*args)` in a worker thread.

    Library errors propagate unchanged; anything else is wrapped in an
    `OpenSystemError` carrying `error_message`.

    ## Example

    ```python
    table = await run_blocking(
        convergence_study, phi0, spec, 1.0, [64, 128],
        error_message="Convergence study failed",
    )
    ```
    """
    try:
        return await asyncio.to_thread(func, *args)
    except OpenSystemError:
        raise
    except Exception as e:
        raise OpenSystemError(f"{error_message}: {e}") from e


async def bounded_gather(
    coros: Iterable[Awaitable[R]],
    /,
    *,
    max_concurrent: int = 4,
) -> list[R]:
    """Run `coros` concurrently, limited to `max_concurrent` at a time.

    Behaves like `asyncio.gather`: results keep the input order and the first
    exception propagates.

    ## Example

    ```python
    outcomes = await bounded_gather(
        (run_blocking(check, error_message=name) for name, check in checks),
        max_concurrent=2,
    )
    ```
    """
    if max_concurrent < 1:
        raise ValueError(f"max_concurrent must be >= 1, got {max_concurrent}")

    semaphore = asyncio.Semaphore(max_concurrent)

    async def _run(coro: Awaitable[R]) -> R:
        async with semaphore:
            return await coro

    return await asyncio.gather(*[_run(coro) for coro in coros])
