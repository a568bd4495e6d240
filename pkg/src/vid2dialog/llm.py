"""
Chat-completion access: prompt templates, request fingerprints, and three
interchangeable backends.

``LiveBackend`` talks to an HTTP endpoint, ``RecordBackend`` wraps a live
backend and stores every exchange in a cassette, ``ReplayBackend`` answers
from a cassette and never touches the network.
"""

import hashlib
import json
import logging
import os
import string
import threading
import time
from collections import deque
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import httpx

from ._io import atomic_write_text, jsonl_lines
from .errors import (
    CassetteMiss,
    EndpointError,
    UnboundPlaceholder,
    UnknownTemplate,
    UnusedVariable,
)

logger = logging.getLogger(__name__)

GENERATION_TEMPERATURE = 1.5
EVAL_TEMPERATURE = 0.0
DIALOGUE_MAX_TOKENS = 1024
TURN_MAX_TOKENS = 256
MAX_TEMPERATURE = 4.0

ENV_ENDPOINT = "VID2DIALOG_ENDPOINT"
ENV_API_KEY = "VID2DIALOG_API_KEY"
ENV_MODEL = "VID2DIALOG_MODEL"
DEFAULT_MODEL = "gemma-3-27b-it"


# ---------------------------------------------------------------------------
# Templates
# ---------------------------------------------------------------------------

_TEMPLATE_DIR_ENV = "VID2DIALOG_TEMPLATES"


def _template_text(name, directory=None):
    directory = directory or os.environ.get(_TEMPLATE_DIR_ENV)
    if directory:
        path = Path(directory) / f"{name}.txt"
        if path.is_file():
            return path.read_text(encoding="utf-8")
    res = resources.files("vid2dialog") / "templates" / f"{name}.txt"
    if not res.is_file():
        raise UnknownTemplate(f"no template named {name!r}")
    return res.read_text(encoding="utf-8")


def load_template(name, directory=None):
    """Template body with its leading ``#:`` intent lines removed."""
    lines = _template_text(name, directory).splitlines()
    while lines and lines[0].startswith("#:"):
        lines.pop(0)
    return "\n".join(lines).strip("\n")


def placeholders(template):
    return {f for _, f, _, _ in string.Formatter().parse(template) if f is not None}


def render_template(template_name, variables, directory=None):
    """Substitute ``{name}`` placeholders; every placeholder must be bound and every variable used."""
    body = load_template(template_name, directory)
    return render_string(body, variables)


def render_string(body, variables):
    needed = placeholders(body)
    for field in needed:
        if not field.isidentifier():
            raise UnboundPlaceholder(f"unsupported placeholder {{{field}}}")
    unbound = sorted(needed - set(variables))
    if unbound:
        raise UnboundPlaceholder(f"unbound placeholder(s): {', '.join(unbound)}")
    unused = sorted(set(variables) - needed)
    if unused:
        raise UnusedVariable(f"variable(s) not used by template: {', '.join(unused)}")
    return body.format_map({k: str(v) for k, v in variables.items()})


# ---------------------------------------------------------------------------
# Requests and completions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PromptRequest:
    system_text: str
    user_text: str
    temperature: float = GENERATION_TEMPERATURE
    max_output_tokens: int = DIALOGUE_MAX_TOKENS
    model_id: str = DEFAULT_MODEL
    # distinguishes deliberate re-asks of an otherwise identical prompt
    attempt: int = 0

    def __post_init__(self):
        if not self.system_text.strip() or not self.user_text.strip():
            raise ValueError("prompt texts must be non-empty")
        if not 0.0 <= self.temperature <= MAX_TEMPERATURE:
            raise ValueError(f"temperature {self.temperature} outside [0, {MAX_TEMPERATURE}]")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")

    @property
    def fingerprint(self):
        payload = json.dumps(asdict(self), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def summary(self, width=80):
        text = " ".join(self.user_text.split())
        return f"{self.model_id} t={self.temperature} #{self.attempt}: {text[:width]}"


@dataclass(frozen=True)
class Completion:
    text: str
    finish_reason: str
    request_fingerprint: str

    def __post_init__(self):
        if self.finish_reason not in ("stop", "length", "error"):
            raise ValueError(f"bad finish_reason {self.finish_reason!r}")


class Cassette:
    """Ordered store of recorded completions keyed by request fingerprint."""

    def __init__(self, name="cassette", path=None):
        self.name = name
        self.path = Path(path) if path else None
        self._entries = {}
        self._summaries = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._entries)

    def __contains__(self, fingerprint):
        return fingerprint in self._entries

    def get(self, fingerprint):
        return self._entries.get(fingerprint)

    def add(self, request, completion):
        fp = request.fingerprint
        with self._lock:
            if fp in self._entries:
                logger.warning("cassette %s already holds %s; keeping the first recording", self.name, fp[:12])
                return self._entries[fp]
            self._entries[fp] = completion
            self._summaries[fp] = request.summary()
            return completion

    def items(self):
        return list(self._entries.items())

    def to_jsonl(self):
        # sorted so that parallel recording still yields a stable file
        lines = []
        for fp in sorted(self._entries):
            c = self._entries[fp]
            lines.append(
                json.dumps(
                    {
                        "fingerprint": fp,
                        "request_summary": self._summaries.get(fp, ""),
                        "completion_text": c.text,
                        "finish_reason": c.finish_reason,
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
            )
        return "".join(line + "\n" for line in lines)

    def save(self, path=None):
        path = Path(path or self.path)
        with self._lock:
            atomic_write_text(path, self.to_jsonl())
        return path

    @classmethod
    def load(cls, path, name=None):
        path = Path(path)
        cas = cls(name or path.stem, path)
        for lineno, line in enumerate(jsonl_lines(path.read_text(encoding="utf-8")), start=1):
            if not line.strip():
                continue
            d = json.loads(line)
            fp = d["fingerprint"]
            if fp in cas._entries:
                raise ValueError(f"{path}:{lineno}: duplicate fingerprint {fp}")
            cas._entries[fp] = Completion(d["completion_text"], d["finish_reason"], fp)
            cas._summaries[fp] = d.get("request_summary", "")
        return cas

    @classmethod
    def open(cls, path, name=None):
        """Load ``path`` if it exists, otherwise start an empty cassette bound to it."""
        path = Path(path)
        return cls.load(path, name) if path.exists() else cls(name or path.stem, path)


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------


class ReplayBackend:
    """Answers strictly from a cassette."""

    kind = "replay"

    def __init__(self, cassette):
        self.cassette = cassette

    def complete(self, request):
        found = self.cassette.get(request.fingerprint)
        if found is None:
            raise CassetteMiss(
                f"cassette {self.cassette.name!r} has no entry for {request.fingerprint[:12]} ({request.summary(60)})"
            )
        return found


class _Throttle:
    def __init__(self, max_in_flight, requests_per_minute, clock, sleep):
        self._sem = threading.BoundedSemaphore(max_in_flight)
        self._rpm = requests_per_minute
        self._stamps = deque()
        self._lock = threading.Lock()
        self._clock = clock
        self._sleep = sleep

    def __enter__(self):
        self._sem.acquire()
        if self._rpm:
            while True:
                with self._lock:
                    now = self._clock()
                    while self._stamps and now - self._stamps[0] >= 60.0:
                        self._stamps.popleft()
                    if len(self._stamps) < self._rpm:
                        self._stamps.append(now)
                        break
                    wait = 60.0 - (now - self._stamps[0])
                self._sleep(wait)
        return self

    def __exit__(self, *exc):
        self._sem.release()


def backoff_delays(max_retries, base_delay=1.0, max_delay=30.0, factor=2.0):
    """Delays slept before each retry; non-decreasing and capped."""
    return [min(max_delay, base_delay * factor**k) for k in range(max_retries)]


def openai_style_body(request):
    return {
        "model": request.model_id,
        "messages": [
            {"role": "system", "content": request.system_text},
            {"role": "user", "content": request.user_text},
        ],
        "temperature": request.temperature,
        "max_tokens": request.max_output_tokens,
    }


def openai_style_reply(payload):
    choice = payload["choices"][0]
    text = choice["message"]["content"] or ""
    reason = choice.get("finish_reason") or "stop"
    return text, reason if reason in ("stop", "length") else "stop"


TRANSIENT_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


class LiveBackend:
    """HTTP chat-completion client with retries and client-side throttling.

    ``build_body`` / ``parse_reply`` form the endpoint adapter; the defaults
    speak the common ``{model, messages, temperature, max_tokens}`` schema.
    """

    kind = "live"

    def __init__(
        self,
        endpoint,
        api_key=None,
        *,
        transport=None,
        timeout=60.0,
        max_retries=4,
        base_delay=1.0,
        max_delay=30.0,
        max_in_flight=4,
        requests_per_minute=None,
        build_body=openai_style_body,
        parse_reply=openai_style_reply,
        sleep=time.sleep,
        clock=time.monotonic,
    ):
        if not endpoint:
            raise ValueError("live backend needs an endpoint URL")
        self.endpoint = endpoint
        self.max_retries = max_retries
        self.delays = backoff_delays(max_retries, base_delay, max_delay)
        self.build_body = build_body
        self.parse_reply = parse_reply
        self._sleep = sleep
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(transport=transport, timeout=timeout, headers=headers)
        self._throttle = _Throttle(max_in_flight, requests_per_minute, clock, sleep)
        self.attempts = 0

    @classmethod
    def from_env(cls, **kwargs):
        endpoint = os.environ.get(ENV_ENDPOINT)
        if not endpoint:
            raise EndpointError(f"set {ENV_ENDPOINT} to use the live backend")
        return cls(endpoint, os.environ.get(ENV_API_KEY), **kwargs)

    def _once(self, request):
        self.attempts += 1
        with self._throttle:
            resp = self._client.post(self.endpoint, json=self.build_body(request))
        if resp.status_code in TRANSIENT_STATUS:
            raise _Transient(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise EndpointError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            text, reason = self.parse_reply(resp.json())
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise EndpointError(f"unexpected response body: {exc}") from exc
        return Completion(text, reason, request.fingerprint)

    def complete(self, request):
        last = None
        for attempt in range(self.max_retries + 1):
            try:
                return self._once(request)
            except (_Transient, httpx.TransportError) as exc:
                last = exc
                if attempt == self.max_retries:
                    break
                delay = self.delays[attempt]
                logger.warning("transient failure (%s); retry %d/%d in %.1fs", exc, attempt + 1, self.max_retries, delay)
                self._sleep(delay)
        raise EndpointError(f"giving up after {self.max_retries + 1} attempts: {last}")

    def close(self):
        self._client.close()


class _Transient(Exception):
    pass


class RecordBackend:
    """Forwards to a live backend and stores each completion in a cassette."""

    kind = "record"

    def __init__(self, cassette, live):
        self.cassette = cassette
        self.live = live

    def complete(self, request):
        found = self.cassette.get(request.fingerprint)
        if found is not None:
            return found
        return self.cassette.add(request, self.live.complete(request))


def complete(request, backend):
    return backend.complete(request)


def make_backend(kind, cassette_path=None, live=None):
    """Build a backend by name: ``live``, ``replay`` or ``record``."""
    if kind == "replay":
        if cassette_path is None:
            raise ValueError("replay backend needs a cassette")
        return ReplayBackend(Cassette.load(cassette_path))
    live = live or LiveBackend.from_env()
    if kind == "live":
        return live
    if kind == "record":
        if cassette_path is None:
            raise ValueError("record backend needs a cassette path")
        return RecordBackend(Cassette.open(cassette_path), live)
    raise ValueError(f"unknown backend {kind!r}")


def model_from_env(default=DEFAULT_MODEL):
    return os.environ.get(ENV_MODEL, default)
