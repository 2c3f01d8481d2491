"""
Trajectory dispatch.

Schedules are pre-sampled, so a batch of trajectories is a pure function of
its schedules. Batches run in-process for a single worker and through a
process pool otherwise; results are always reassembled in trajectory order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

from .settings import batch_log, ensure_configured, generic_message, get_setting, is_debug_mode

_worker_problem = None


def run_trajectory_batch(problem, schedules, start=0):
    """Run ``schedules`` (trajectories ``start`` onward) and return their results in order."""
    if schedules:
        batch_log(start, start + len(schedules), 1)
    return [problem.run(schedule) for schedule in schedules]


def _init_worker(problem, debug):
    global _worker_problem  # noqa: PLW0603
    ensure_configured(QEMFORGE_DEBUG_MODE=debug)
    _worker_problem = problem


def _run_in_worker(schedules, start):
    return run_trajectory_batch(_worker_problem, schedules, start)


def dispatch(problem, schedules, workers=1):
    """
    Run every schedule of ``problem`` and return one result per schedule.

    Identical schedules (most often the empty one) are integrated once and the
    result is shared between their trajectories.
    """
    unique = {}
    for schedule in schedules:
        unique.setdefault(schedule.key, schedule)
    distinct = list(unique.values())
    generic_message(f"{len(schedules)} trajectories, {len(distinct)} distinct schedules")

    batch_size = max(1, int(get_setting("QEMFORGE_BATCH_SIZE", 512)))
    batches = [(distinct[i : i + batch_size], i) for i in range(0, len(distinct), batch_size)]
    results = []
    if workers <= 1 or len(batches) <= 1:
        for batch, start in batches:
            results.extend(run_trajectory_batch(problem, batch, start))
    else:
        batch_log(0, len(distinct), workers)
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(problem, is_debug_mode())) as pool:
            for batch_results in pool.map(_run_in_worker, *zip(*batches)):
                results.extend(batch_results)

    by_key = {schedule.key: result for schedule, result in zip(distinct, results)}
    return [by_key[schedule.key] for schedule in schedules]
