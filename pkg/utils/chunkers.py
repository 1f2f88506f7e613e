from typing import List, Sequence, Tuple, TypeVar

T = TypeVar("T")


class BlockChunker:
    @staticmethod
    def chunk_range(start: int, end: int, size: int) -> List[Tuple[int, int]]:
        """Split the inclusive block range [start, end] into consecutive pages of `size` blocks."""
        if size <= 0:
            raise ValueError(f"page size must be positive, got {size}")
        if end < start:
            return []
        pages = []
        current = start
        while current <= end:
            page_end = min(current + size - 1, end)
            pages.append((current, page_end))
            current = page_end + 1
        return pages

    @staticmethod
    def chunk_records(records: Sequence[T], size: int) -> List[Sequence[T]]:
        """Contiguous slices of at most `size` records; order is preserved."""
        if size <= 0:
            raise ValueError(f"chunk size must be positive, got {size}")
        return [records[i:i + size] for i in range(0, len(records), size)]

    @staticmethod
    def sample_blocks(start: int, end: int, stride: int) -> List[int]:
        """start, start+stride, ... with `end` always included when end >= start."""
        if stride <= 0:
            raise ValueError(f"stride must be positive, got {stride}")
        if end < start:
            return []
        blocks = list(range(start, end + 1, stride))
        if blocks[-1] != end:
            blocks.append(end)
        return blocks
