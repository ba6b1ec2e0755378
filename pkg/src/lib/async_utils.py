import threading
from typing import Callable, List, Sequence, TypeVar

T = TypeVar('T')
R = TypeVar('R')


def threaded_map(func: Callable[[T], R], items: Sequence[T], threads: int = 1) -> List[R]:
    """
    Applies func to every item on up to `threads` worker threads.
    Results come back in input order; the first worker exception is re-raised.
    """
    if threads <= 1 or len(items) <= 1:
        return [func(i) for i in items]

    results: List = [None] * len(items)
    errors: List[BaseException] = []
    cursor = {'next': 0}
    lock = threading.Lock()

    def worker():
        while True:
            with lock:
                if errors or cursor['next'] >= len(items):
                    return

                i = cursor['next']
                cursor['next'] += 1

            try:
                results[i] = func(items[i])
            except BaseException as e:
                with lock:
                    errors.append(e)
                return

    workers = []
    for _ in range(min(threads, len(items))):
        thread = threading.Thread(target=worker)
        thread.daemon = True
        thread.start()
        workers.append(thread)

    for thread in workers:
        thread.join()

    if errors:
        raise errors[0]

    return results
