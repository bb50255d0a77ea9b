"""Flat search-context layout shared by both kernel backends.

A context is one ``int64`` array::

    [header (HEADER words) | mapping (n_slots) | beg (n_levels) | end (n_levels) | medge (n_levels)]

``beg[l]:end[l]`` is an absolute range into ``graph.adj``. For the current
level it is the live candidate range; for shallower levels it is the cached
remainder reloaded on backtrack.
"""

LEVEL = 0
T_LIMIT = 1
ITERS = 2         # iterations executed by this task
EMITTED = 3       # matches emitted since last harvest
BSEARCH = 4       # binary searches since last harvest
BSEARCH_BT = 5    # binary searches issued while backtracking since last harvest
OUT_FILL = 6      # rows written into the enumeration buffer
NEXT_SIG = 7      # iteration at which the abort signal is next polled
STEAL_MIN = 8     # steal requests are honoured only once ITERS exceeds this
HEADER = 9

# control words (per worker)
CTRL_STEAL = 0
CTRL_ABORT = 1

# kernel return codes
DONE = 0
PAUSED = 1
STEAL = 2
SIGNAL = 3
FULL = 4

# descend outcomes
DESCENDED = 0
EMIT = 1
PRUNED = 2


def offsets(n_slots: int, n_levels: int) -> tuple[int, int, int, int, int]:
    """(mapping, beg, end, medge, total) word offsets."""
    m = HEADER
    b = m + n_slots
    e = b + n_levels
    s = e + n_levels
    return m, b, e, s, s + n_levels
