import asyncio
import logging
from typing import Callable, List, Sequence, TypeVar

from tqdm import tqdm

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


async def gather_in_workers(func: Callable[[T], R], items: Sequence[T], limit: int,
                            desc: str = "", progress: bool = False) -> List[R]:
    """在线程中并发执行 func(item)，最多 limit 个同时运行；结果按输入顺序返回"""
    semaphore = asyncio.Semaphore(max(1, limit))
    bar = tqdm(total=len(items), desc=desc, disable=not progress, leave=False)

    async def run_one(item: T) -> R:
        async with semaphore:
            result = await asyncio.to_thread(func, item)
        bar.update(1)
        return result

    try:
        return list(await asyncio.gather(*(run_one(item) for item in items)))
    finally:
        bar.close()


def run_in_workers(func: Callable[[T], R], items: Sequence[T], limit: int,
                   desc: str = "", progress: bool = False) -> List[R]:
    """gather_in_workers 的同步入口"""
    if not items:
        return []
    if limit <= 1:
        return [func(item) for item in tqdm(items, desc=desc, disable=not progress, leave=False)]
    logger.debug(f"{desc or '任务'}: {len(items)} 项，并发上限 {limit}")
    return asyncio.run(gather_in_workers(func, items, limit, desc, progress))
