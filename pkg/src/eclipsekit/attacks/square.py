"""Square Attack, L-inf version, targeted at raising one label's score."""

from __future__ import annotations

import math

import numpy as np

from ..oracle import CountedOracle, QueryLedger
from ..tensorops import as_image, clip_to_budget
from ._common import AttackOutcome

MAX_RESAMPLE = 10


def p_selection(p_init: float, it: int, n_iters: int) -> float:
    """Piecewise-constant halving schedule of the square area fraction."""
    it = int(it / n_iters * 10000)
    if 10 < it <= 50:
        return p_init / 2
    if 50 < it <= 200:
        return p_init / 4
    if 200 < it <= 500:
        return p_init / 8
    if 500 < it <= 1000:
        return p_init / 16
    if 1000 < it <= 2000:
        return p_init / 32
    if 2000 < it <= 4000:
        return p_init / 64
    if 4000 < it <= 6000:
        return p_init / 128
    if 6000 < it <= 8000:
        return p_init / 256
    if 8000 < it <= 10000:
        return p_init / 512
    return p_init


def square_side(p: float, height: int, width: int) -> int:
    s = int(round(math.sqrt(p * height * width)))
    return max(1, min(s, min(height, width) - 1)) if min(height, width) > 1 else 1


def square_attack_linf(oracle, x, target_label, beta: float = 0.1, p_init: float = 0.2,
                       max_iters: int = 10000, seed: int = 0,
                       success_threshold: float = 0.5) -> AttackOutcome:
    """Random search with per-channel +-beta squares.

    ``max_iters`` bounds the total number of oracle queries, the stripe
    initialisation included.
    """
    if not 0 < p_init <= 1:
        raise ValueError("p_init must lie in (0, 1]")
    if not 0 <= beta <= 1:
        raise ValueError("beta must lie in [0, 1]")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    x = as_image(x, copy=True)
    h, w, nch = x.shape
    rng = np.random.default_rng(seed)
    ledger = QueryLedger()
    f = CountedOracle(oracle, ledger)
    target_label = str(target_label)

    stripes = rng.choice([-beta, beta], size=(1, w, nch))
    current = clip_to_budget(x + stripes, x, beta)
    fitness = f.query(current, target_label, phase="initial")
    fitness_trace = [(0, fitness)]
    records = []
    stats = {"accepted": 0, "rejected": 0}
    success = fitness > success_threshold

    t = 0
    for it in range(1, max_iters):
        if success:
            break
        t = it
        p = p_selection(p_init, it, max_iters)
        s = square_side(p, h, w)
        r = int(rng.integers(0, h - s + 1))
        c = int(rng.integers(0, w - s + 1))
        x_win = x[r:r + s, c:c + s, :]
        cur_win = current[r:r + s, c:c + s, :]
        for _ in range(MAX_RESAMPLE):
            deltas = rng.choice([-beta, beta], size=(1, 1, nch))
            new_win = np.clip(x_win + deltas, 0.0, 1.0)
            if not np.all(np.abs(new_win - cur_win) < 1e-7):
                break
        cand = current.copy()
        cand[r:r + s, c:c + s, :] = new_win
        cand = clip_to_budget(cand, x, beta)
        value = f.query(cand, target_label, phase="probe")
        accepted = value > fitness
        if accepted:
            current, fitness = cand, value
            stats["accepted"] += 1
        else:
            stats["rejected"] += 1
        fitness_trace.append((t, fitness))
        records.append({"t": t, "fitness": fitness, "p": p, "square_size": s,
                        "accepted": accepted, "queries_so_far": ledger.total_queries})
        success = fitness > success_threshold

    return AttackOutcome(
        success=success,
        adversarial_image=current,
        queries=ledger,
        fitness_trace=fitness_trace,
        iterations_used=t,
        attack="square",
        final_fitness=fitness,
        records=records,
        stats=stats,
    )
