import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eclipsekit.attacks import (
    EclipseConfig,
    default_min_area,
    eclipse_attack,
    estimate_gradients,
    read_trace,
    write_trace,
)
from eclipsekit.corpus import make_synthetic_corpus
from eclipsekit.oracle import CountedOracle, Oracle, QueryLedger, SyntheticOracle, SyntheticOracleSpec
from eclipsekit.saliency import occlusion_saliency
from eclipsekit.testing import analytic_differences


class Flat(Oracle):
    def scores(self, image, phase=None):
        return {"cat": 0.6, "dog": 0.4}


@pytest.fixture(scope="module")
def world():
    corpus = make_synthetic_corpus(n_images=2, size=16, seed=3, difficulty=(0.7, 0.8))
    item = corpus.items[0]
    heat = occlusion_saliency(SyntheticOracle(corpus.surrogate), item.image, item.target)
    return SyntheticOracle(corpus.spec), item, heat


class TestEstimateGradients:
    def test_empty_batch(self, exact_oracle, rng):
        buf = rng.normal(size=(8, 8, 3))
        before = buf.copy()
        estimate_gradients(exact_oracle, rng.random((8, 8, 3)), [], 0.1, buf, "dog")
        np.testing.assert_array_equal(buf, before)

    def test_matches_exact_differences(self, two_label_spec, exact_oracle, rng):
        x = rng.random((8, 8, 3))
        batch = rng.choice(x.size, 40, replace=False)
        buf = np.zeros(x.shape)
        estimate_gradients(exact_oracle, x, batch, 0.1, buf, "dog")
        exact = analytic_differences(two_label_spec, x, "dog", batch, 0.1)
        np.testing.assert_allclose(buf.reshape(-1)[batch], exact, rtol=0, atol=1e-12)
        untouched = np.setdiff1d(np.arange(x.size), batch)
        assert np.all(buf.reshape(-1)[untouched] == 0)

    def test_tuple_coordinates(self, exact_oracle, rng):
        x = rng.random((8, 8, 3))
        a, b = np.zeros(x.shape), np.zeros(x.shape)
        coords = np.array([[0, 1, 2], [7, 7, 0]])
        estimate_gradients(exact_oracle, x, coords, 0.1, a, "dog")
        estimate_gradients(exact_oracle, x, np.ravel_multi_index(tuple(coords.T), x.shape), 0.1, b, "dog")
        np.testing.assert_array_equal(a, b)

    def test_saturated_pixel(self, exact_oracle, rng):
        x = rng.random((8, 8, 3))
        x[2, 3, 1] = 1.0
        buf = np.full(x.shape, 7.0)
        estimate_gradients(exact_oracle, x, [[2, 3, 1]], 0.1, buf, "dog")
        assert buf[2, 3, 1] == 0.0

    def test_does_not_mutate_input(self, exact_oracle, rng):
        x = rng.random((8, 8, 3))
        before = x.copy()
        estimate_gradients(exact_oracle, x, np.arange(20), 0.1, np.zeros(x.shape), "dog")
        np.testing.assert_array_equal(x, before)

    def test_one_query_per_probe(self, exact_oracle, rng):
        ledger = QueryLedger()
        estimate_gradients(CountedOracle(exact_oracle, ledger), rng.random((8, 8, 3)), np.arange(9),
                           0.1, np.zeros((8, 8, 3)), "dog", base=0.3)
        assert ledger.per_phase == {"gradient-probe": 9}


class TestSchedules:
    def run(self, world, **kw):
        orc, item, heat = world
        states = []

        def snap(state):
            states.append({
                "current": state.current.copy(),
                "candidate": None if state.candidate is None else state.candidate.copy(),
                "sampled": int(state.sampled.sum()),
                "reset": state.reset,
                "accepted": state.accepted,
            })

        kw.setdefault("success_threshold", 0.99)  # keep climbing: exercises rejections and resets
        cfg = EclipseConfig(max_iterations=kw.pop("iters", 120), seed=5, **kw)
        return eclipse_attack(orc, heat, item.image, item.target, cfg, on_iteration=snap), states, item

    def test_epsilon_decays_only_on_accept(self, world):
        out, _, _ = self.run(world)
        eps = 0.1
        for rec in out.records:
            if rec["accepted"]:
                eps = max(0.02, 0.95 * eps)
            assert rec["epsilon"] == eps
        assert out.stats["accepted"] > 0 and out.stats["rejected"] > 0

    def test_tau_schedule(self, world):
        out, _, _ = self.run(world)
        for rec in out.records:
            assert rec["tau"] == min(0.5, 0.01 * rec["t"])

    def test_fitness_nondecreasing_and_budget(self, world):
        out, states, item = self.run(world)
        values = [f for _, f in out.fitness_trace]
        assert all(b >= a for a, b in zip(values, values[1:]))
        lo, hi = np.maximum(0, item.image - 0.1), np.minimum(1, item.image + 0.1)
        for s in states:
            for img in (s["current"], s["candidate"]):
                if img is not None:
                    assert np.all(img >= lo) and np.all(img <= hi)

    def test_sampling_without_replacement(self, world):
        out, states, _ = self.run(world)
        prev = 0
        for s in states:
            if s["reset"]:
                prev = 0
                continue
            # the sampled set grew by a full batch of fresh coordinates
            assert s["sampled"] == prev + 64
            prev = s["sampled"]

    def test_resets_restore_full_mask(self, world):
        out, _, _ = self.run(world, iters=200)
        assert out.stats["resets"] > 0
        for rec in out.records:
            if rec["reset"]:
                assert rec["mask_area"] == 16 * 16
            else:
                assert rec["mask_area"] == rec["threshold_area"]

    def test_mask_antitone_between_resets(self, world):
        out, _, _ = self.run(world, iters=200)
        prev = 16 * 16
        for rec in out.records:
            if not rec["reset"]:
                assert rec["mask_area"] <= prev
            prev = rec["mask_area"]


class TestLedger:
    @pytest.mark.parametrize("s", [8, 64])
    def test_best_scope_exact(self, world, s):
        orc, item, heat = world
        out = eclipse_attack(orc, heat, item.image, item.target, EclipseConfig(sample_size=s, max_iterations=40))
        T = out.iterations_used
        assert out.stats["skipped"] == 0
        assert out.total_queries == 1 + T * (s + 1)
        assert out.queries.per_phase == {"initial": 1, "gradient-probe": T * s, "fitness-check": T}
        assert out.queries.uncached_total == 1 + T * (s + 2)
        for rec in out.records:
            assert rec["queries_so_far"] == 1 + rec["t"] * (s + 1)

    def test_none_scope_requeries(self, world):
        orc, item, heat = world
        out = eclipse_attack(orc, heat, item.image, item.target,
                             EclipseConfig(sample_size=16, max_iterations=20, cache="none"))
        assert out.total_queries == 1 + 20 * 18 and out.queries.cache_hits == 0

    def test_all_scope_dedupes(self, world):
        orc, item, heat = world
        out = eclipse_attack(orc, heat, item.image, item.target,
                             EclipseConfig(sample_size=16, max_iterations=20, cache="all"))
        assert out.queries.uncached_total == 1 + 20 * 18
        assert out.total_queries <= 1 + 20 * 17

    def test_scopes_agree_on_result(self, world):
        orc, item, heat = world
        runs = [eclipse_attack(orc, heat, item.image, item.target,
                               EclipseConfig(sample_size=16, max_iterations=25, cache=c))
                for c in ("best", "all", "none")]
        for r in runs[1:]:
            np.testing.assert_array_equal(r.adversarial_image, runs[0].adversarial_image)
            assert r.fitness_trace == runs[0].fitness_trace

    def test_blur_consumes_no_queries(self, world):
        orc, item, heat = world
        cfg = dict(sample_size=32, max_iterations=30, success_threshold=0.999)
        full = eclipse_attack(orc, heat, item.image, item.target, EclipseConfig(**cfg))
        flat = eclipse_attack(orc, heat, item.image, item.target, EclipseConfig(blur=False, **cfg))
        assert [r["queries_so_far"] for r in full.records] == [r["queries_so_far"] for r in flat.records]


class TestOutcomes:
    def test_zero_budget_identity(self, world):
        orc, item, heat = world
        out = eclipse_attack(orc, heat, item.image, item.target, EclipseConfig(beta=0.0, max_iterations=10))
        np.testing.assert_array_equal(out.adversarial_image, item.image)
        assert not out.success

    def test_already_adversarial(self, world):
        orc, item, heat = world
        out = eclipse_attack(orc, heat, item.image, item.ground_truth, EclipseConfig())
        assert out.success and out.iterations_used == 0 and out.total_queries == 1

    def test_zero_gradient_skips_candidate(self, rng):
        out = eclipse_attack(Flat(), None, rng.random((8, 8, 3)), "dog",
                             EclipseConfig(sample_size=8, max_iterations=5))
        assert out.stats["skipped"] == 5 and not out.success
        assert out.queries.per_phase == {"initial": 1, "gradient-probe": 40}

    def test_convergence_example(self, rng):
        t = rng.normal(size=(2, 16, 16, 3))
        t -= t.reshape(2, -1).mean(axis=1)[:, None, None, None]
        t[1] -= (t[1].ravel() @ t[0].ravel()) / (t[0].ravel() @ t[0].ravel()) * t[0]
        t /= np.linalg.norm(t.reshape(2, -1), axis=1)[:, None, None, None]
        spec = SyntheticOracleSpec(t, ("cat", "dog"), temperature=0.25)
        x = np.full((16, 16, 3), 0.5)
        x = np.clip(x + 0.04 * np.sign(t[0] - t[1]), 0, 1)
        orc = SyntheticOracle(spec)
        assert orc.query(x, "dog") < 0.5
        out = eclipse_attack(orc, None, x, "dog",
                             EclipseConfig(epsilon0=0.1, sample_size=64, kernel_size=3, sigma=1.0, max_iterations=300))
        assert out.success and out.final_fitness > 0.5
        assert orc.query(out.adversarial_image, "dog") == out.final_fitness

    def test_deterministic(self, world):
        orc, item, heat = world
        cfg = EclipseConfig(max_iterations=30, seed=11)
        a = eclipse_attack(orc, heat, item.image, item.target, cfg)
        b = eclipse_attack(orc, heat, item.image, item.target, cfg)
        np.testing.assert_array_equal(a.adversarial_image, b.adversarial_image)
        assert a.fitness_trace == b.fitness_trace and a.records == b.records
        assert a.queries.to_dict() == b.queries.to_dict()

    def test_heatmap_callable_and_validation(self, world):
        orc, item, heat = world
        a = eclipse_attack(orc, heat, item.image, item.target, EclipseConfig(max_iterations=5))
        b = eclipse_attack(orc, lambda img: heat, item.image, item.target, EclipseConfig(max_iterations=5))
        np.testing.assert_array_equal(a.adversarial_image, b.adversarial_image)
        with pytest.raises(ValueError):
            eclipse_attack(orc, np.ones((4, 4)), item.image, item.target)

    @pytest.mark.parametrize("bad", [
        dict(beta=1.5), dict(sample_size=0), dict(probe_magnitude=0), dict(cache="some"),
        dict(kernel_size=2), dict(sigma=0), dict(epsilon0=0), dict(sample_size=10_000),
    ])
    def test_config_validation(self, world, bad):
        orc, item, heat = world
        with pytest.raises(ValueError):
            eclipse_attack(orc, heat, item.image, item.target, EclipseConfig(**bad))

    def test_default_min_area(self):
        assert default_min_area(16, 16) == math.ceil(2.56) == 3
        assert default_min_area(1, 1) == 1

    def test_trace_roundtrip(self, world, tmp_path):
        orc, item, heat = world
        out = eclipse_attack(orc, heat, item.image, item.target, EclipseConfig(max_iterations=5))
        write_trace(tmp_path / "t.jsonl", out, "adv.png")
        records, final = read_trace(tmp_path / "t.jsonl")
        assert len(records) == out.iterations_used
        for rec in records:
            assert {"t", "fitness", "epsilon", "tau", "mask_area", "queries_so_far"} <= set(rec)
        assert final["adversarial_image"] == "adv.png"
        assert final["queries"]["total_queries"] == out.total_queries


@given(seed=st.integers(0, 2 ** 32 - 1), beta=st.floats(0.01, 0.3), s=st.integers(1, 48),
       blur=st.booleans())
@settings(max_examples=25, deadline=None)
def test_invariants_property(seed, beta, s, blur):
    r = np.random.default_rng(seed)
    spec = SyntheticOracleSpec(r.normal(size=(2, 6, 6, 3)), ("a", "b"), temperature=0.5)
    x = r.random((6, 6, 3))
    seen = []
    out = eclipse_attack(SyntheticOracle(spec), r.random((6, 6)), x, "b",
                         EclipseConfig(beta=beta, sample_size=s, max_iterations=15, blur=blur, seed=seed,
                                       success_threshold=0.99),
                         on_iteration=lambda st_: seen.append(st_.current.copy()))
    values = [f for _, f in out.fitness_trace]
    assert all(b >= a for a, b in zip(values, values[1:]))
    lo, hi = np.maximum(0, x - beta), np.minimum(1, x + beta)
    for img in seen + [out.adversarial_image]:
        assert np.all(img >= lo) and np.all(img <= hi)
    assert out.success == (out.final_fitness > 0.99)
    assert out.total_queries == 1 + out.iterations_used * s + (out.iterations_used - out.stats["skipped"])
