import threading

import numpy as np
import pytest
import requests
from hypothesis import given, settings
from hypothesis import strategies as st

from eclipsekit.oracle import (
    TOKEN_ENV,
    CachedOracle,
    CountedOracle,
    Oracle,
    OracleEndpointConfig,
    OracleStatusError,
    OracleTimeout,
    OracleTransportError,
    QueryLedger,
    RemoteOracle,
    SchemaViolation,
    SyntheticOracle,
    SyntheticOracleSpec,
    cached,
    check_scores,
    counted,
    encode_request,
    image_key,
    load_oracle,
    parse_response,
    remote_query,
    serve_oracle,
    synthetic_confidence,
)
from eclipsekit.testing import analytic_gradient


class TopK(Oracle):
    def __init__(self, scores):
        self._scores = scores

    def scores(self, image, phase=None):
        return dict(self._scores)


class TestSynthetic:
    def test_own_template_wins(self, rng):
        templates = rng.normal(size=(3, 6, 6, 3))
        spec = SyntheticOracleSpec(templates, ("a", "b", "c"), 0.5)
        orc = SyntheticOracle(spec, quantize=False)
        for k, lab in enumerate(spec.labels):
            t = templates[k]
            img = (t - t.min()) / (t.max() - t.min())
            s = orc.scores(img)
            # scaled template: correlation with its own template dominates
            assert max(s, key=s.get) == lab

    def test_zero_image_uniform(self, rng):
        spec = SyntheticOracleSpec(rng.normal(size=(2, 4, 4, 3)), ("a", "b"))
        s = synthetic_confidence(spec, np.zeros((4, 4, 3)))
        assert s["a"] == pytest.approx(0.5) and s["b"] == pytest.approx(0.5)

    def test_high_temperature_flattens(self, rng):
        spec = SyntheticOracleSpec(rng.normal(size=(2, 4, 4, 3)), ("a", "b"), temperature=1e6)
        s = synthetic_confidence(spec, rng.random((4, 4, 3)))
        assert abs(s["a"] - 0.5) < 1e-3

    @given(seed=st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=30)
    def test_scores_sum_to_one(self, seed):
        r = np.random.default_rng(seed)
        spec = SyntheticOracleSpec(r.normal(size=(4, 5, 5, 3)), tuple("abcd"), 0.3)
        s = synthetic_confidence(spec, r.random((5, 5, 3)))
        assert sum(s.values()) == pytest.approx(1.0, abs=1e-9)
        check_scores(s, full_distribution=True)

    def test_analytic_gradient_vs_central_differences(self, two_label_spec, rng):
        x = rng.random((8, 8, 3)) * 0.8 + 0.1
        grad = analytic_gradient(two_label_spec, x, "dog")
        h = 1e-4
        for idx in rng.choice(x.size, 25, replace=False):
            up, down = x.copy(), x.copy()
            up.reshape(-1)[idx] += h
            down.reshape(-1)[idx] -= h
            fd = (synthetic_confidence(two_label_spec, up)["dog"]
                  - synthetic_confidence(two_label_spec, down)["dog"]) / (2 * h)
            assert abs(fd - grad.reshape(-1)[idx]) < 1e-5

    def test_deterministic(self, two_label_spec, rng):
        orc = SyntheticOracle(two_label_spec)
        x = rng.random((8, 8, 3))
        assert orc.scores(x) == orc.scores(x.copy())

    def test_quantization_matches_byte_view(self, two_label_spec, rng):
        x = rng.random((8, 8, 3))
        q = np.rint(x * 255) / 255
        assert SyntheticOracle(two_label_spec).scores(x) == SyntheticOracle(two_label_spec, quantize=False).scores(q)

    def test_top_k_and_absence(self, rng):
        spec = SyntheticOracleSpec(rng.normal(size=(4, 4, 4, 3)), tuple("abcd"))
        orc = SyntheticOracle(spec, top_k=2)
        x = rng.random((4, 4, 3))
        s = orc.scores(x)
        assert len(s) == 2
        missing = next(lab for lab in spec.labels if lab not in s)
        assert orc.query(x, missing) == 0.0

    def test_spec_validation(self, rng):
        with pytest.raises(ValueError):
            SyntheticOracleSpec(rng.normal(size=(1, 4, 4, 3)), ("a",))
        with pytest.raises(ValueError):
            SyntheticOracleSpec(rng.normal(size=(2, 4, 4, 3)), ("a", "a"))
        with pytest.raises(ValueError):
            SyntheticOracleSpec(rng.normal(size=(2, 4, 4, 3)), ("a", "b"), temperature=0)
        spec = SyntheticOracleSpec(rng.normal(size=(2, 4, 4, 3)), ("a", "b"))
        with pytest.raises(ValueError):
            synthetic_confidence(spec, np.zeros((5, 4, 3)))

    def test_spec_save_load(self, tmp_path, two_label_spec):
        two_label_spec.save(tmp_path / "o.npz")
        back = SyntheticOracleSpec.load(tmp_path / "o.npz")
        np.testing.assert_array_equal(back.templates, two_label_spec.templates)
        assert back.labels == two_label_spec.labels and back.temperature == two_label_spec.temperature
        assert isinstance(load_oracle(f"synthetic:{tmp_path / 'o.npz'}"), SyntheticOracle)


class TestTopKAbsence:
    def test_absent_target_scores_zero(self):
        orc = TopK({"a": 0.5, "b": 0.3, "c": 0.1})
        assert orc.query(np.zeros((2, 2, 3)), "dog") == 0.0


class TestScoreValidation:
    def test_parse_identity(self):
        assert parse_response({"scores": {"cat": 0.7, "dog": 0.3}}) == {"cat": 0.7, "dog": 0.3}

    @pytest.mark.parametrize("payload", [
        {"scores": {"cat": 1.2}},
        {"scores": {}},
        {"scores": {"cat": -0.1}},
        {"scores": {"cat": float("nan")}},
        {"scores": {"cat": "high"}},
        {"scores": [0.3]},
        {"other": {}},
        [1, 2],
    ])
    def test_schema_violations(self, payload):
        with pytest.raises(SchemaViolation):
            parse_response(payload)

    def test_full_distribution_sum(self):
        with pytest.raises(SchemaViolation):
            check_scores({"a": 0.5, "b": 0.4}, full_distribution=True)
        check_scores({"a": 0.5, "b": 0.49995}, full_distribution=True)


class TestAccounting:
    def test_counting(self, two_label_spec, rng):
        ledger = QueryLedger()
        orc = counted(SyntheticOracle(two_label_spec), ledger)
        for k in range(5):
            orc.query(rng.random((8, 8, 3)), "cat", phase="gradient-probe" if k % 2 else "fitness-check")
        assert ledger.total_queries == 5
        assert ledger.per_phase == {"gradient-probe": 2, "fitness-check": 3}
        assert sum(ledger.per_phase.values()) == ledger.total_queries

    def test_cache_dedupes_identical_queries(self, two_label_spec, rng):
        ledger = QueryLedger()
        orc = cached(counted(SyntheticOracle(two_label_spec), ledger), ledger)
        x = rng.random((8, 8, 3))
        orc.query(x, "cat")
        orc.query(x.copy(), "cat")
        assert ledger.total_queries == 1 and ledger.cache_hits == 1
        assert ledger.uncached_total == 2

    def test_cache_key_uses_bytes(self, rng):
        x = rng.integers(0, 256, (4, 4, 3)) / 255.0
        assert image_key(x) == image_key(x + 1e-4)
        assert image_key(x) != image_key(np.clip(x + 2 / 255, 0, 1))

    @given(seed=st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=20)
    def test_cache_observationally_equivalent(self, seed):
        r = np.random.default_rng(seed)
        spec = SyntheticOracleSpec(r.normal(size=(2, 4, 4, 3)), ("a", "b"))
        plain = SyntheticOracle(spec)
        memo = CachedOracle(SyntheticOracle(spec), maxsize=3)
        pool = [r.random((4, 4, 3)) for _ in range(5)]
        for k in r.integers(0, 5, 30):
            assert memo.scores(pool[k]) == plain.scores(pool[k])

    def test_lru_eviction(self, two_label_spec, rng):
        ledger = QueryLedger()
        orc = CachedOracle(CountedOracle(SyntheticOracle(two_label_spec), ledger), ledger, maxsize=1)
        a, b = rng.random((2, 8, 8, 3))
        for img in (a, b, a):
            orc.query(img, "cat")
        assert ledger.total_queries == 3

    def test_ledger_thread_safe(self):
        ledger = QueryLedger()

        def work():
            for _ in range(1000):
                ledger.record("gradient-probe")

        threads = [threading.Thread(target=work) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert ledger.total_queries == 8000 == ledger.per_phase["gradient-probe"]


@pytest.fixture
def server(two_label_spec):
    srv = serve_oracle(SyntheticOracle(two_label_spec), token="s3cret")
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    host, port = srv.server_address[:2]
    yield f"http://{host}:{port}/"
    srv.shutdown()
    srv.server_close()


class TestRemote:
    def test_wire_contract(self, server, two_label_spec, rng):
        x = rng.random((8, 8, 3))
        endpoint = OracleEndpointConfig(server, timeout=5, top_k=2, auth_token="s3cret")
        remote = remote_query(endpoint, x)
        local = SyntheticOracle(two_label_spec).scores(x)
        assert remote.keys() == local.keys()
        for k in local:
            assert remote[k] == pytest.approx(local[k], abs=1e-12)

    def test_request_encoding(self, rng):
        body = encode_request(rng.random((3, 3, 3)), 5)
        assert set(body) == {"image_b64", "top_k"} and body["top_k"] == 5

    def test_remote_oracle_env(self, server, monkeypatch, rng):
        monkeypatch.setenv(TOKEN_ENV, "s3cret")
        orc = load_oracle(f"http:{server}")
        assert isinstance(orc, RemoteOracle)
        assert 0 <= orc.query(rng.random((8, 8, 3)), "dog") <= 1

    def test_unauthorized(self, server, rng):
        with pytest.raises(OracleStatusError) as info:
            remote_query(OracleEndpointConfig(server, auth_token="wrong"), rng.random((8, 8, 3)))
        assert info.value.status == 401

    def test_unreachable(self, rng):
        with pytest.raises(OracleTransportError):
            remote_query(OracleEndpointConfig("http://127.0.0.1:9/", timeout=1), rng.random((2, 2, 3)))

    def test_timeout_kind(self, monkeypatch, rng):
        def slow(*args, **kwargs):
            raise requests.Timeout("slow")

        monkeypatch.setattr(requests, "post", slow)
        with pytest.raises(OracleTimeout):
            remote_query(OracleEndpointConfig("http://example.invalid/", timeout=0.01), rng.random((2, 2, 3)))

    def test_selector_errors(self):
        with pytest.raises(ValueError):
            load_oracle("ftp://nowhere")
