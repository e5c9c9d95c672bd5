import threading
import time

from workers import run_in_workers


def test_results_keep_input_order():
    def slow_square(x):
        time.sleep(0.01 * (5 - x))
        return x * x

    assert run_in_workers(slow_square, list(range(5)), limit=4) == [0, 1, 4, 9, 16]


def test_concurrency_limit():
    lock = threading.Lock()
    state = {"active": 0, "peak": 0}

    def task(_):
        with lock:
            state["active"] += 1
            state["peak"] = max(state["peak"], state["active"])
        time.sleep(0.02)
        with lock:
            state["active"] -= 1
        return True

    assert all(run_in_workers(task, list(range(12)), limit=3))
    assert 1 <= state["peak"] <= 3


def test_sequential_and_empty():
    calls = []
    assert run_in_workers(lambda x: calls.append(threading.get_ident()) or x, [1, 2], limit=1) == [1, 2]
    assert len(set(calls)) == 1
    assert run_in_workers(lambda x: x, [], limit=4) == []
