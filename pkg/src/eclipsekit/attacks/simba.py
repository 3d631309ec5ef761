"""SimBA and SimBA-DCT: greedy search over random orthonormal directions.

Each direction is tried once, ``+step`` first and ``-step`` second; the first
sign that raises the target score is kept.
"""

from __future__ import annotations

import math

import numpy as np

from ..oracle import CountedOracle, QueryLedger
from ..tensorops import as_image, clip_to_budget, idct2
from ._common import AttackOutcome


def _check(step, beta, max_iters):
    if not 0 < step <= beta:
        raise ValueError(f"step must lie in (0, beta]; got step={step}, beta={beta}")
    if beta > 1:
        raise ValueError("beta must not exceed 1")
    if max_iters < 0:
        raise ValueError("max_iters must be non-negative")


def _greedy_search(oracle, x, target_label, directions, step, beta, max_iters,
                   success_threshold, name):
    """Shared loop. ``directions`` yields callables ``apply(image, signed_step)``
    returning the unclipped candidate."""
    ledger = QueryLedger()
    f = CountedOracle(oracle, ledger)
    target_label = str(target_label)
    current = x.copy()
    fitness = f.query(current, target_label, phase="initial")
    fitness_trace = [(0, fitness)]
    records = []
    stats = {"accepted_probes": 0, "rejected_probes": 0, "noop_probes": 0}
    success = fitness > success_threshold
    t = 0
    for apply in directions:
        if success or t >= max_iters:
            break
        t += 1
        accepted = False
        for sign in (1.0, -1.0):
            cand = clip_to_budget(apply(current, sign * step), x, beta)
            if np.array_equal(cand, current):
                stats["noop_probes"] += 1
                continue
            value = f.query(cand, target_label, phase="probe")
            if value > fitness:
                current, fitness = cand, value
                stats["accepted_probes"] += 1
                accepted = True
                break
            stats["rejected_probes"] += 1
        fitness_trace.append((t, fitness))
        records.append({"t": t, "fitness": fitness, "accepted": accepted,
                        "queries_so_far": ledger.total_queries})
        success = fitness > success_threshold
    return AttackOutcome(
        success=success,
        adversarial_image=current,
        queries=ledger,
        fitness_trace=fitness_trace,
        iterations_used=t,
        attack=name,
        final_fitness=fitness,
        records=records,
        stats=stats,
    )


def simba_attack(oracle, x, target_label, step: float = 0.1, beta: float = 0.1,
                 max_iters: int = 100000, seed: int = 0,
                 success_threshold: float = 0.5) -> AttackOutcome:
    """SimBA over the pixel basis, directions drawn without replacement."""
    _check(step, beta, max_iters)
    x = as_image(x, copy=True)
    order = np.random.default_rng(seed).permutation(x.size)

    def directions():
        for idx in order:
            def apply(img, delta, idx=idx):
                out = img.copy()
                out.reshape(-1)[idx] += delta
                return out
            yield apply

    return _greedy_search(oracle, x, target_label, directions(), step, beta, max_iters,
                          success_threshold, "simba")


def dct_basis(height: int, width: int, u: int, v: int) -> np.ndarray:
    """Unit-norm pixel-space image of DCT coefficient ``(u, v)``."""
    coeffs = np.zeros((height, width))
    coeffs[u, v] = 1.0
    return idct2(coeffs)


def low_frequency_directions(height: int, width: int, channels: int, freq_fraction: float):
    rows = max(1, math.ceil(freq_fraction * height))
    cols = max(1, math.ceil(freq_fraction * width))
    return [(u, v, c) for u in range(rows) for v in range(cols) for c in range(channels)]


def simba_dct_attack(oracle, x, target_label, step: float = 0.1, beta: float = 0.1,
                     max_iters: int = 100000, freq_fraction: float = 0.125, seed: int = 0,
                     success_threshold: float = 0.5) -> AttackOutcome:
    """SimBA over orthonormal DCT basis images restricted to the lowest
    ``freq_fraction`` of frequencies along each axis."""
    _check(step, beta, max_iters)
    if not 0 < freq_fraction <= 1:
        raise ValueError("freq_fraction must lie in (0, 1]")
    x = as_image(x, copy=True)
    h, w, nch = x.shape
    dirs = low_frequency_directions(h, w, nch, freq_fraction)
    order = np.random.default_rng(seed).permutation(len(dirs))

    def directions():
        for k in order:
            u, v, c = dirs[k]
            basis = dct_basis(h, w, u, v)

            def apply(img, delta, basis=basis, c=c):
                out = img.copy()
                out[:, :, c] += delta * basis
                return out
            yield apply

    return _greedy_search(oracle, x, target_label, directions(), step, beta, max_iters,
                          success_threshold, "simba-dct")
