"""Window batchers over a stream of delimiter-terminated token sequences.

The optimized policy never cuts a context: each window takes whole contexts
while they fit the budget, which is equivalent to sliding a raw window of n
tokens and retreating its end to the last delimiter token. Tokens past that
delimiter are deferred to the next window, not discarded, so concatenating all
windows reproduces the input stream exactly.

The standard policy is the fixed-stride baseline: the concatenated stream is
cut into exact n-token ranges regardless of context boundaries.

A lossy variant of the optimized policy (tail tokens after the last delimiter
of each raw n-token window are discarded and the next window starts at the raw
boundary) is kept for comparison runs only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator


class ContextStreamError(ValueError):
    """An input context violates the packing invariants the batcher relies on."""


@dataclass
class SlidePolicy:
    kind: str = "optimized"  # optimized | standard
    n_budget: int = 4096
    keep_final_partial: bool = True  # standard policy only


@dataclass
class WindowShard:
    ids: list[int]
    window_index: int
    dropped_from_raw_span: int = 0  # tokens deferred past this window's raw end
    source: tuple[int, int] | None = None  # (first, last) input context index


def _check_context(ids: list[int], n: int, split_token_id: int, index: int) -> None:
    if not ids:
        raise ContextStreamError(f"context {index} is empty")
    if len(ids) > n:
        raise ContextStreamError(f"context {index} has {len(ids)} tokens, budget is {n}")
    try:
        first_split = ids.index(split_token_id)
    except ValueError:
        raise ContextStreamError(f"context {index} lacks the terminal split token") from None
    if first_split != len(ids) - 1:
        raise ContextStreamError(f"context {index} contains an interior split token")


def slide_optimized(
    contexts: Iterable[list[int]], n: int, split_token_id: int = 0
) -> Iterator[WindowShard]:
    """Greedy whole-context windows of at most n tokens.

    Every emitted window ends with the split token, and the concatenation of
    all windows equals the concatenation of all inputs. dropped_from_raw_span
    records how many tokens of the raw n-token span were pushed to the next
    window.
    """
    cur: list[int] = []
    first_idx = 0
    last_idx = -1
    window_index = 0
    for index, ids in enumerate(contexts):
        _check_context(ids, n, split_token_id, index)
        if cur and len(cur) + len(ids) > n:
            yield WindowShard(cur, window_index, n - len(cur), (first_idx, last_idx))
            window_index += 1
            cur = []
        if not cur:
            first_idx = index
            cur = list(ids)
        else:
            cur.extend(ids)
        last_idx = index
    if cur:
        yield WindowShard(cur, window_index, 0, (first_idx, last_idx))


def slide_standard(
    contexts: Iterable[list[int]], n: int, keep_final_partial: bool = True
) -> Iterator[WindowShard]:
    """Exact partition of the concatenated stream into n-token windows.

    Contexts may be cut mid-sequence; the final remainder (< n tokens) is
    emitted only when keep_final_partial is set.
    """
    if n <= 0:
        raise ValueError("window size must be positive")
    buf: list[int] = []
    spans: list[tuple[int, int]] = []  # (context index, token count) queued in buf
    window_index = 0

    def drain_window() -> WindowShard:
        nonlocal buf, spans, window_index
        out = buf[:n]
        buf = buf[n:]
        taken = 0
        first = spans[0][0]
        last = first
        while taken < n:
            ci, length = spans[0]
            last = ci
            if taken + length <= n:
                taken += length
                spans.pop(0)
            else:
                spans[0] = (ci, length - (n - taken))
                taken = n
        shard = WindowShard(out, window_index, 0, (first, last))
        window_index += 1
        return shard

    for index, ids in enumerate(contexts):
        if not ids:
            continue
        buf.extend(ids)
        spans.append((index, len(ids)))
        while len(buf) >= n:
            yield drain_window()
    if buf and keep_final_partial:
        yield WindowShard(buf, window_index, 0, (spans[0][0], spans[-1][0]))


def slide_optimized_lossy(
    contexts: Iterable[list[int]], n: int, split_token_id: int = 0
) -> Iterator[WindowShard]:
    """Fixed-stride raw windows, each cut back to its last split token.

    Tokens between the cut and the raw boundary are discarded from the corpus
    (the comparison-only reading of the boundary rule); the next raw window
    starts at the boundary, so a context head can be lost entirely.
    """
    buf: list[int] = []
    window_index = 0
    exhausted = False
    it = iter(contexts)
    index = -1
    while not exhausted:
        while len(buf) < n:
            try:
                ids = next(it)
            except StopIteration:
                exhausted = True
                break
            index += 1
            _check_context(ids, n, split_token_id, index)
            buf.extend(ids)
        raw = buf[:n]
        buf = buf[n:]
        if not raw:
            break
        cut = len(raw) - 1
        while cut >= 0 and raw[cut] != split_token_id:
            cut -= 1
        if cut < 0:
            # Only possible on a final partial span with no delimiter left.
            continue
        yield WindowShard(raw[: cut + 1], window_index, len(raw) - cut - 1, None)
        window_index += 1
