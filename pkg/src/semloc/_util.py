"""Small shared helpers: thread budget, atomic writes, float formatting."""

import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "SEMLOC_THREADS"


def worker_count() -> int:
    """Thread budget for batch work; SEMLOC_THREADS caps it, floor 1."""
    raw = os.environ.get(THREADS_ENV)
    if raw is not None:
        try:
            n = int(raw)
        except ValueError:
            n = 1
        return max(1, n)
    return max(1, os.cpu_count() or 1)


def parallel_map(fn, items, workers: int | None = None) -> list:
    """Map preserving order; threads only when they can actually help."""
    items = list(items)
    if workers is None:
        workers = worker_count()
    if workers <= 1 or len(items) < 4:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def write_text_atomic(path: str, text: str) -> None:
    """Write via a sibling temp file and rename so readers never see partial files."""
    directory = os.path.dirname(os.path.abspath(path))
    tmp = os.path.join(directory, f".{os.path.basename(path)}.tmp")
    with open(tmp, "w") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def fmt(x) -> str:
    # repr of a Python float is the shortest exact round-trip form,
    # which keeps emitted files byte-stable across runs
    return repr(float(x))
