"""Analytic load-balancing models (explanatory only; the scheduler never consults them).

Symbols, with validity ranges:

``t_imb``      active threads in the imbalanced baseline (1..32)
``k``          times an optimisation fires
``eps``        per-trigger overhead relative to one search iteration (0..1)
``i_opt``      search iterations of the optimised run
``phi``        core groups: cores divided by warp width (336 on an A40)
``o``          signal-monitoring overhead factor, slightly below 1
``l_imb``      fraction of execution time spent in the tail (0..1)
``theta``      tail-vs-normal stealing benefit ratio (> 1)
"""
from __future__ import annotations

from dataclasses import dataclass

WARP_WIDTH = 32


@dataclass(frozen=True)
class ModelParams:
    t_imb: float = 1.0
    k: float = 0.0
    eps: float = 0.0
    i_opt: float = 1.0
    phi: float = 336.0
    o: float = 1.0
    l_imb: float = 0.5
    theta: float = 1.0
    kc_over_t: float = 0.0


def intra_warp_speedup(t_imb: float, k: float, eps: float, i_opt: float) -> float:
    if i_opt == 0:
        raise ValueError("i_opt must be non-zero")
    return WARP_WIDTH / (t_imb * (1.0 + k * eps / i_opt))


def tail_speedup(o: float, phi: float, l_imb: float, kc_over_t: float = 0.0) -> float:
    """Speedup from tail redistribution; never exceeds ``o * phi``."""
    big_phi = (phi - 1.0) / phi
    return o / ((1.0 - big_phi * l_imb) + kc_over_t)


def residual_tail_fraction(l_imb: float, theta: float) -> float:
    """Tail fraction left after intra-warp stealing speeds tail warps ``theta`` times more."""
    return (l_imb / theta) / (1.0 - l_imb + l_imb / theta)


def tail_fraction_from_work(work_fraction: float, phi: float) -> float:
    """Tail time fraction when one warp holds ``work_fraction`` of the work."""
    if not 0.0 < work_fraction <= 1.0:
        raise ValueError("work_fraction must be in (0, 1]")
    f = work_fraction
    return 1.0 / (((1.0 - f) / f) / phi + 1.0)
