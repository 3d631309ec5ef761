"""ECLIPSE: hill climbing on blurred, saliency-masked finite-difference gradients.

Each iteration probes ``sample_size`` unseen coordinates inside the current
mask, smooths the persistent gradient buffer with a Gaussian kernel, steps
by ``epsilon * delta / max|delta|`` and keeps the step only if the target
score improves. The mask is ``heatmap >= tau`` with ``tau`` rising by
``tau_step`` per iteration up to ``tau_cap``; it falls back to the full
image when it gets too small or mostly sampled.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..oracle import CachedOracle, CountedOracle, QueryLedger
from ..saliency import constant_heatmap, mask_reset_check, normalize_heatmap, threshold_mask
from ..tensorops import as_image, clip_to_budget, gaussian_blur, gaussian_kernel
from ._common import AttackOutcome

# "best": reuse the stored score of the current best (the only repeated
# query of the algorithm); "all": memoize every image; "none": re-query.
CACHE_SCOPES = ("best", "all", "none")


@dataclass
class EclipseConfig:
    beta: float = 0.1
    max_iterations: int = 1000
    epsilon0: float = 0.1
    sample_size: int = 64
    kernel_size: int = 3
    sigma: float = 1.0
    probe_magnitude: float = 0.1
    min_area: int | None = None
    success_threshold: float = 0.5
    epsilon_decay: float = 0.95
    epsilon_floor: float = 0.02
    tau_step: float = 0.01
    tau_cap: float = 0.5
    sampled_fraction_cap: float = 0.75
    seed: int = 0
    blur: bool = True
    cache: str = "best"

    def validate(self, shape=None) -> None:
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")
        if not 0.0 < self.probe_magnitude <= 1.0:
            raise ValueError("probe_magnitude must lie in (0, 1]")
        if self.cache not in CACHE_SCOPES:
            raise ValueError(f"cache must be one of {CACHE_SCOPES}")
        if self.epsilon0 <= 0:
            raise ValueError("epsilon0 must be positive")
        gaussian_kernel(self.kernel_size, self.sigma)
        if shape is not None and self.sample_size > int(np.prod(shape)):
            raise ValueError(f"sample_size {self.sample_size} exceeds the {int(np.prod(shape))} image coordinates")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EclipseState:
    current: np.ndarray
    gradient: np.ndarray
    mask: np.ndarray
    sampled: np.ndarray
    tau: float
    epsilon: float
    fitness: float
    iteration: int = 0
    candidate: np.ndarray | None = None
    accepted: bool = False
    reset: bool = False


def default_min_area(height: int, width: int) -> int:
    return max(1, math.ceil(0.01 * height * width))


def _resolve_heatmap(heatmap, image):
    h, w = image.shape[:2]
    if heatmap is None:
        return constant_heatmap(h, w)
    if callable(heatmap):
        heatmap = heatmap(image)
    heat = np.asarray(heatmap, dtype=np.float64)
    if heat.shape != (h, w):
        raise ValueError(f"heatmap shape {heat.shape} does not match image {(h, w)}")
    if heat.min() < 0 or heat.max() > 1:
        heat = normalize_heatmap(heat)
    return heat


def _flat_indices(batch, shape):
    arr = np.asarray(batch, dtype=np.int64)
    if arr.ndim == 2:
        return np.ravel_multi_index(tuple(arr.T), shape)
    return arr.reshape(-1)


def estimate_gradients(oracle, current, batch, probe_magnitude, buffer, target_label, base=None):
    """Forward differences ``f(C + probe * e_ijc) - f(C)`` written into ``buffer``.

    ``batch`` holds flat indices or ``(i, j, c)`` rows. Probes are clipped to
    [0, 1]; coordinates outside the batch keep their previous estimate.
    """
    if buffer.dtype != np.float64 or not buffer.flags.c_contiguous:
        raise ValueError("gradient buffer must be a C-contiguous float64 array")
    idx = _flat_indices(batch, current.shape)
    if idx.size == 0:
        return buffer
    if base is None:
        base = oracle.query(current, target_label, phase="fitness-check")
    work = np.array(current, dtype=np.float64, copy=True)
    flat = work.reshape(-1)
    out = buffer.reshape(-1)
    for k in idx:
        old = flat[k]
        flat[k] = min(1.0, old + probe_magnitude)
        out[k] = oracle.query(work, target_label, phase="gradient-probe") - base
        flat[k] = old
    return buffer


def eclipse_attack(oracle, heatmap, x, target_label, config: EclipseConfig | None = None,
                   on_iteration=None) -> AttackOutcome:
    """Run ECLIPSE against ``oracle`` for ``target_label``.

    ``heatmap`` is an ``(H, W)`` array in [0, 1], a callable computing one
    from the image, or ``None`` for an uninformative map (full-image mask).
    ``on_iteration`` receives the :class:`EclipseState` after every iteration.
    """
    cfg = config or EclipseConfig()
    x = as_image(x, copy=True)
    cfg.validate(x.shape)
    h, w, nch = x.shape
    heat = _resolve_heatmap(heatmap, x)
    min_area = cfg.min_area if cfg.min_area is not None else default_min_area(h, w)
    kernel = gaussian_kernel(cfg.kernel_size, cfg.sigma) if cfg.blur else None
    target_label = str(target_label)

    ledger = QueryLedger()
    f = CountedOracle(oracle, ledger)
    if cfg.cache == "all":
        f = CachedOracle(f, ledger)
    rng = np.random.default_rng(cfg.seed)

    state = EclipseState(
        current=x.copy(),
        gradient=np.zeros(x.shape, dtype=np.float64),
        mask=np.ones((h, w), dtype=bool),
        sampled=np.zeros(x.shape, dtype=bool),
        tau=0.0,
        epsilon=cfg.epsilon0,
        fitness=f.query(x, target_label, phase="initial"),
    )
    fitness_trace = [(0, state.fitness)]
    records = []
    stats = {"accepted": 0, "rejected": 0, "skipped": 0, "resets": 0}
    success = state.fitness > cfg.success_threshold

    t = 0
    while not success and t < cfg.max_iterations:
        t += 1
        state.iteration = t
        state.candidate = None
        state.accepted = False

        available = np.flatnonzero(state.mask[:, :, None] & ~state.sampled)
        batch = rng.choice(available, size=min(cfg.sample_size, available.size), replace=False)
        state.sampled.reshape(-1)[batch] = True

        if cfg.cache == "best":
            base = state.fitness
            ledger.record_hit()
        else:
            base = f.query(state.current, target_label, phase="fitness-check")
        estimate_gradients(f, state.current, batch, cfg.probe_magnitude, state.gradient, target_label, base)

        delta = gaussian_blur(state.gradient, kernel) if kernel is not None else state.gradient.copy()
        peak = np.abs(delta).max()
        if peak > 0:
            candidate = clip_to_budget(state.current + state.epsilon * delta / peak, x, cfg.beta)
            state.candidate = candidate
            cand_fitness = f.query(candidate, target_label, phase="fitness-check")
            if cand_fitness > state.fitness:
                state.current = candidate
                state.fitness = cand_fitness
                state.epsilon = max(cfg.epsilon_floor, cfg.epsilon_decay * state.epsilon)
                state.accepted = True
                stats["accepted"] += 1
            else:
                stats["rejected"] += 1
        else:
            stats["skipped"] += 1

        state.tau = min(cfg.tau_cap, cfg.tau_step * t)
        state.mask = threshold_mask(heat, state.tau)
        threshold_area = int(state.mask.sum())
        n_sampled = int(state.sampled.sum())
        unsampled_in_mask = nch * threshold_area - int((state.mask[:, :, None] & state.sampled).sum())
        state.reset = (
            mask_reset_check(threshold_area, n_sampled, min_area, nch, cfg.sampled_fraction_cap)
            or unsampled_in_mask < cfg.sample_size
        )
        if state.reset:
            state.mask = np.ones((h, w), dtype=bool)
            state.sampled[:] = False
            stats["resets"] += 1

        fitness_trace.append((t, state.fitness))
        records.append({
            "t": t,
            "fitness": state.fitness,
            "epsilon": state.epsilon,
            "tau": state.tau,
            "mask_area": int(state.mask.sum()),
            "threshold_area": threshold_area,
            "queries_so_far": ledger.total_queries,
            "uncached_queries_so_far": ledger.uncached_total,
            "accepted": state.accepted,
            "reset": state.reset,
        })
        if on_iteration is not None:
            on_iteration(state)
        if state.accepted and state.fitness > cfg.success_threshold:
            success = True

    stats["cache_hits"] = ledger.cache_hits
    return AttackOutcome(
        success=success,
        adversarial_image=state.current,
        queries=ledger,
        fitness_trace=fitness_trace,
        iterations_used=t,
        attack="eclipse",
        final_fitness=state.fitness,
        records=records,
        stats=stats,
    )
