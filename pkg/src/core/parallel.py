from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

import numpy as np
from tqdm import tqdm

from src import ENV

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(
    func: Callable[[T], R],
    items: Iterable[T],
    workers: Optional[int] = None,
    desc: str = "",
    verbose: bool = False,
) -> List[R]:
    """
    用线程池并行执行 func，结果严格按输入顺序返回。

    归约顺序只取决于输入顺序，与线程数无关，因此下游求和逐位可复现。
    numpy 的大块运算会释放 GIL，线程池足以获得并行收益。
    """
    items = list(items)
    workers = workers or ENV.default_workers
    if workers <= 1 or len(items) <= 1:
        iterator = map(func, items)
        if verbose:
            iterator = tqdm(iterator, total=len(items), desc=desc)
        return list(iterator)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        iterator = executor.map(func, items)
        if verbose:
            iterator = tqdm(iterator, total=len(items), desc=desc)
        return list(iterator)


def chunked(ids: np.ndarray, size: Optional[int] = None) -> List[np.ndarray]:
    size = size or ENV.pair_chunk
    ids = np.asarray(ids)
    return [ids[i:i + size] for i in range(0, len(ids), size)]
