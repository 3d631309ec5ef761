"""Black-box classifier oracles and query accounting.

Every oracle exposes ``scores(image)`` returning a ``{label: confidence}``
map (possibly a top-k subset) and ``query(image, label)`` returning the
confidence of one label, 0 when that label is absent from the response.
Attack code only ever sees these two methods.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import math
import os
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
import requests
from PIL import Image

from .tensorops import as_image, from_uint8, png_bytes, to_uint8

PHASES = ("initial", "gradient-probe", "fitness-check")

TOKEN_ENV = "ECLIPSEKIT_ORACLE_TOKEN"
URL_ENV = "ECLIPSEKIT_ORACLE_URL"
TIMEOUT_ENV = "ECLIPSEKIT_ORACLE_TIMEOUT"


class OracleError(Exception):
    """Base class for oracle failures."""


class OracleTransportError(OracleError):
    """The oracle could not be reached."""


class OracleTimeout(OracleTransportError):
    pass


class OracleStatusError(OracleError):
    def __init__(self, status: int, body: str = ""):
        super().__init__(f"oracle returned HTTP {status}: {body[:200]}")
        self.status = status


class SchemaViolation(OracleError):
    """The oracle answered, but the payload breaks the wire contract."""


def check_scores(scores, *, full_distribution: bool = False) -> dict[str, float]:
    if not isinstance(scores, dict) or not scores:
        raise SchemaViolation("score map must be a non-empty object")
    out = {}
    for label, value in scores.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaViolation(f"score for {label!r} is not a number: {value!r}")
        value = float(value)
        if not math.isfinite(value) or value < 0.0 or value > 1.0:
            raise SchemaViolation(f"score for {label!r} outside [0, 1]: {value!r}")
        out[str(label)] = value
    if full_distribution and abs(sum(out.values()) - 1.0) > 1e-4:
        raise SchemaViolation("full score distribution does not sum to 1")
    return out


def image_key(image) -> str:
    """Content hash of the 8-bit representation of an image."""
    data = to_uint8(image)
    h = hashlib.sha256()
    h.update(repr(data.shape).encode())
    h.update(data.tobytes())
    return h.hexdigest()


class Oracle:
    labels: tuple[str, ...] | None = None

    def scores(self, image, phase: str | None = None) -> dict[str, float]:
        raise NotImplementedError

    def query(self, image, label, phase: str | None = None) -> float:
        return self.scores(image, phase=phase).get(str(label), 0.0)


# ---------------------------------------------------------------------------
# synthetic oracle


@dataclass
class SyntheticOracleSpec:
    """Softmax over template correlations: ``p_k ∝ exp(<T_k, x> / temperature)``."""

    templates: np.ndarray
    labels: tuple[str, ...]
    temperature: float = 1.0

    def __post_init__(self):
        self.templates = np.asarray(self.templates, dtype=np.float64)
        self.labels = tuple(str(lb) for lb in self.labels)
        if self.templates.ndim != 4 or self.templates.shape[3] != 3:
            raise ValueError("templates must have shape (n_labels, H, W, 3)")
        if len(self.labels) < 2 or len(self.labels) != self.templates.shape[0]:
            raise ValueError("need at least 2 labels, one template per label")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels must be unique")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")

    @property
    def shape(self):
        return self.templates.shape[1:]

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            np.savez(fh, templates=self.templates, labels=np.array(self.labels),
                     temperature=np.array(self.temperature))

    @classmethod
    def load(cls, path) -> "SyntheticOracleSpec":
        with np.load(path, allow_pickle=False) as data:
            return cls(data["templates"], tuple(data["labels"].tolist()), float(data["temperature"]))


def synthetic_logits(spec: SyntheticOracleSpec, image) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.shape != spec.shape:
        raise ValueError(f"image shape {img.shape} does not match templates {spec.shape}")
    return np.tensordot(spec.templates, img, axes=3) / spec.temperature


def _softmax(z):
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def synthetic_confidence(spec: SyntheticOracleSpec, image) -> dict[str, float]:
    probs = _softmax(synthetic_logits(spec, image))
    return dict(zip(spec.labels, probs.tolist()))


class SyntheticOracle(Oracle):
    """In-process deterministic oracle.

    With ``quantize`` on (the default) images are rounded to 8-bit before
    scoring, the same view a remote service gets from a PNG upload.
    """

    def __init__(self, spec: SyntheticOracleSpec, *, quantize: bool = True, top_k: int | None = None):
        self.spec = spec
        self.quantize = quantize
        self.top_k = top_k
        self.labels = spec.labels

    def scores(self, image, phase=None):
        img = as_image(image)
        if self.quantize:
            img = from_uint8(to_uint8(img))
        result = synthetic_confidence(self.spec, img)
        if self.top_k is not None and self.top_k < len(result):
            ranked = sorted(result.items(), key=lambda kv: (-kv[1], kv[0]))[: self.top_k]
            result = dict(ranked)
        return result


# ---------------------------------------------------------------------------
# remote oracle


@dataclass
class OracleEndpointConfig:
    url: str
    timeout: float = 10.0
    top_k: int = 5
    auth_token: str | None = None

    @classmethod
    def from_env(cls, url: str | None = None, **overrides) -> "OracleEndpointConfig":
        url = url or os.environ.get(URL_ENV)
        if not url:
            raise ValueError(f"no oracle URL given and {URL_ENV} is unset")
        cfg = cls(url=url, auth_token=os.environ.get(TOKEN_ENV))
        if os.environ.get(TIMEOUT_ENV):
            cfg.timeout = float(os.environ[TIMEOUT_ENV])
        for key, value in overrides.items():
            if value is not None:
                setattr(cfg, key, value)
        return cfg


def encode_request(image, top_k: int) -> dict:
    return {"image_b64": base64.b64encode(png_bytes(as_image(image))).decode("ascii"), "top_k": int(top_k)}


def parse_response(payload) -> dict[str, float]:
    if not isinstance(payload, dict) or "scores" not in payload:
        raise SchemaViolation("response must be an object with a 'scores' field")
    return check_scores(payload["scores"])


def remote_query(endpoint: OracleEndpointConfig, image, session=None) -> dict[str, float]:
    headers = {"Content-Type": "application/json"}
    if endpoint.auth_token:
        headers["Authorization"] = f"Bearer {endpoint.auth_token}"
    post = (session or requests).post
    try:
        resp = post(endpoint.url, json=encode_request(image, endpoint.top_k),
                    headers=headers, timeout=endpoint.timeout)
    except requests.Timeout as exc:
        raise OracleTimeout(f"oracle timed out after {endpoint.timeout}s") from exc
    except requests.RequestException as exc:
        raise OracleTransportError(str(exc)) from exc
    if not 200 <= resp.status_code < 300:
        raise OracleStatusError(resp.status_code, resp.text)
    try:
        payload = resp.json()
    except ValueError as exc:
        raise SchemaViolation("response body is not JSON") from exc
    return parse_response(payload)


class RemoteOracle(Oracle):
    def __init__(self, endpoint: OracleEndpointConfig):
        self.endpoint = endpoint
        self._local = threading.local()

    def _session(self):
        if not hasattr(self._local, "session"):
            self._local.session = requests.Session()
        return self._local.session

    def scores(self, image, phase=None):
        return remote_query(self.endpoint, image, session=self._session())


# ---------------------------------------------------------------------------
# accounting wrappers


@dataclass
class QueryLedger:
    total_queries: int = 0
    per_phase: dict = field(default_factory=dict)
    cache_hits: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record(self, phase: str | None) -> None:
        tag = phase or "untagged"
        with self._lock:
            self.total_queries += 1
            self.per_phase[tag] = self.per_phase.get(tag, 0) + 1

    def record_hit(self) -> None:
        with self._lock:
            self.cache_hits += 1

    @property
    def uncached_total(self) -> int:
        """Queries that would have been sent without the cache."""
        return self.total_queries + self.cache_hits

    def to_dict(self) -> dict:
        with self._lock:
            return {
                "total_queries": self.total_queries,
                "per_phase": dict(sorted(self.per_phase.items())),
                "cache_hits": self.cache_hits,
                "uncached_total": self.total_queries + self.cache_hits,
            }


class CountedOracle(Oracle):
    def __init__(self, inner: Oracle, ledger: QueryLedger | None = None):
        self.inner = inner
        self.ledger = ledger if ledger is not None else QueryLedger()
        self.labels = getattr(inner, "labels", None)

    def scores(self, image, phase=None):
        self.ledger.record(phase)
        return self.inner.scores(image, phase=phase)


class CachedOracle(Oracle):
    """Memoize responses keyed by the 8-bit content hash of the image."""

    def __init__(self, inner: Oracle, ledger: QueryLedger | None = None, maxsize: int | None = None):
        self.inner = inner
        self.ledger = ledger
        self.maxsize = maxsize
        self.hits = 0
        self.labels = getattr(inner, "labels", None)
        self._cache: OrderedDict[str, dict] = OrderedDict()
        self._lock = threading.Lock()

    def scores(self, image, phase=None):
        key = image_key(image)
        with self._lock:
            if key in self._cache:
                self._cache.move_to_end(key)
                self.hits += 1
                if self.ledger is not None:
                    self.ledger.record_hit()
                return dict(self._cache[key])
        result = self.inner.scores(image, phase=phase)
        with self._lock:
            self._cache[key] = dict(result)
            if self.maxsize is not None and len(self._cache) > self.maxsize:
                self._cache.popitem(last=False)
        return dict(result)


def counted(oracle: Oracle, ledger: QueryLedger | None = None) -> CountedOracle:
    return CountedOracle(oracle, ledger)


def cached(oracle: Oracle, ledger: QueryLedger | None = None, maxsize: int | None = None) -> CachedOracle:
    return CachedOracle(oracle, ledger, maxsize)


def query(oracle: Oracle, image, target_label, phase: str | None = None) -> float:
    return oracle.query(image, target_label, phase=phase)


# ---------------------------------------------------------------------------
# serving


def _make_handler(oracle: Oracle, token: str | None):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _reply(self, status, payload):
            body = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self):
            if token and self.headers.get("Authorization") != f"Bearer {token}":
                self._reply(401, {"error": "unauthorized"})
                return
            try:
                length = int(self.headers.get("Content-Length", 0))
                req = json.loads(self.rfile.read(length))
                with Image.open(io.BytesIO(base64.b64decode(req["image_b64"]))) as im:
                    image = from_uint8(np.asarray(im.convert("RGB")))
                top_k = int(req.get("top_k", 5))
            except (ValueError, KeyError, OSError) as exc:
                self._reply(400, {"error": str(exc)})
                return
            scores = oracle.scores(image)
            ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[: max(top_k, 1)]
            self._reply(200, {"scores": dict(ranked)})

    return Handler


def serve_oracle(oracle: Oracle, host: str = "127.0.0.1", port: int = 0, token: str | None = None):
    """Start a threaded HTTP server speaking the remote-oracle wire contract.

    Returns the server; its bound address is ``server.server_address``.
    Call ``serve_forever`` (or run it in a thread) and ``shutdown`` when done.
    """
    return ThreadingHTTPServer((host, port), _make_handler(oracle, token))


def load_oracle(selector: str) -> Oracle:
    """Build an oracle from ``synthetic:<path>`` or ``http(s)://...`` selectors."""
    if selector.startswith("synthetic:"):
        return SyntheticOracle(SyntheticOracleSpec.load(Path(selector[len("synthetic:"):])))
    if selector.startswith("http:") and not selector.startswith("http://"):
        selector = selector[len("http:"):]
    if selector.startswith(("http://", "https://")):
        return RemoteOracle(OracleEndpointConfig.from_env(selector))
    raise ValueError(f"unknown oracle selector {selector!r}")
