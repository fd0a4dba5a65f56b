import asyncio
import threading

import pytest

from opensystem.errors import DomainError, OpenSystemError
from opensystem.tasks import bounded_gather, run_blocking


@pytest.mark.asyncio
async def test_run_blocking_with_success__expect_result_returned():
    result = await run_blocking(pow, 2, 10, error_message="Power failed")

    assert result == 1024


@pytest.mark.asyncio
async def test_run_blocking__expect_runs_off_the_event_loop_thread():
    loop_thread = threading.get_ident()

    worker_thread = await run_blocking(threading.get_ident, error_message="failed")

    assert worker_thread != loop_thread


@pytest.mark.asyncio
async def test_run_blocking_with_library_error__expect_error_unchanged():
    def fail():
        raise DomainError("width must be positive")

    with pytest.raises(DomainError, match="width must be positive"):
        await run_blocking(fail, error_message="Evolution failed")


@pytest.mark.asyncio
async def test_run_blocking_with_foreign_exception__expect_open_system_error():
    def fail():
        raise MemoryError("array too large")

    with pytest.raises(OpenSystemError, match="Evolution failed: array too large"):
        await run_blocking(fail, error_message="Evolution failed")


@pytest.mark.asyncio
async def test_bounded_gather__expect_results_in_input_order():
    async def delayed(value, delay):
        await asyncio.sleep(delay)
        return value

    results = await bounded_gather(
        [delayed("a", 0.03), delayed("b", 0.0), delayed("c", 0.01)]
    )

    assert results == ["a", "b", "c"]


@pytest.mark.asyncio
async def test_bounded_gather_with_limit__expect_concurrency_capped():
    running = 0
    peak = 0

    async def task():
        nonlocal running, peak
        running += 1
        peak = max(peak, running)
        await asyncio.sleep(0.01)
        running -= 1

    await bounded_gather([task() for _ in range(6)], max_concurrent=2)

    assert peak == 2


@pytest.mark.asyncio
async def test_bounded_gather_with_failure__expect_first_exception_propagated():
    async def ok():
        return 1

    async def fail():
        raise DomainError("bad input")

    with pytest.raises(DomainError, match="bad input"):
        await bounded_gather([ok(), fail(), ok()])


@pytest.mark.asyncio
async def test_bounded_gather_with_invalid_limit__expect_value_error():
    with pytest.raises(ValueError, match="max_concurrent"):
        await bounded_gather([], max_concurrent=0)
