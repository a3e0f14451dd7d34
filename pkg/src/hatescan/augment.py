"""Data augmentation through translation and text-generation services.

Both services sit behind small client interfaces. Replay clients answer from a
JSONL store keyed by a canonical request hash, so tests and reproductions never
need network access or credentials.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import re
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import Comment, HateLabel, LabeledComment, Origin, SentimentLabel
from .errors import ConfigError, DataError, ParameterError, ReplayMiss
from .textprep import PipelineConfig, normalize_text

log = logging.getLogger(__name__)

_WS = re.compile(r"\s+")


def _canonical(value):
    if isinstance(value, str):
        return _WS.sub(" ", value).strip()
    if isinstance(value, dict):
        return {str(k): _canonical(v) for k, v in sorted(value.items())}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    return value


def request_hash(operation: str, request: dict) -> str:
    """Stable hash of a request; insensitive to whitespace runs and key order."""
    blob = json.dumps({"operation": operation, "request": _canonical(request)},
                      sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ReplayStore:
    """Request-hash -> response mapping persisted as JSONL."""

    def __init__(self, entries: dict | None = None):
        self._entries = dict(entries or {})

    @classmethod
    def load(cls, path) -> "ReplayStore":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"replay store not found: {path}")
        entries = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    entries[rec["hash"]] = rec
                except (json.JSONDecodeError, KeyError):
                    raise DataError(f"{path}:{lineno}: malformed replay record") from None
        return cls(entries)

    def __len__(self):
        return len(self._entries)

    def lookup(self, operation: str, request: dict):
        h = request_hash(operation, request)
        try:
            return self._entries[h]["response"]
        except KeyError:
            raise ReplayMiss(h, operation) from None

    def add(self, operation: str, request: dict, response) -> str:
        h = request_hash(operation, request)
        self._entries[h] = {"hash": h, "operation": operation, "request": request, "response": response}
        return h

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for h in sorted(self._entries):
                fh.write(json.dumps(self._entries[h], ensure_ascii=False, sort_keys=True) + "\n")


# ---------------------------------------------------------------- clients

class TranslationClient:
    mode = "replay"

    def translate(self, texts: Sequence[str], source_lang: str, target_lang: str) -> list[str]:
        raise NotImplementedError


class GenerationClient:
    mode = "replay"

    def generate(self, spec: "GenerationSpec") -> list[str]:
        raise NotImplementedError


def translation_request(text: str, source_lang: str, target_lang: str) -> dict:
    return {"text": text, "source_lang": source_lang.upper(), "target_lang": target_lang.upper()}


class ReplayTranslationClient(TranslationClient):
    def __init__(self, store: ReplayStore):
        self.store = store

    def translate(self, texts, source_lang, target_lang):
        return [str(self.store.lookup("translate", translation_request(t, source_lang, target_lang)))
                for t in texts]


@dataclass(frozen=True)
class GenerationSpec:
    template: str
    label: SentimentLabel
    count: int
    model: str = "gpt-4"

    def request(self) -> dict:
        return {"template": self.template, "label": self.label.value, "count": self.count,
                "model": self.model}


class ReplayGenerationClient(GenerationClient):
    def __init__(self, store: ReplayStore):
        self.store = store

    def generate(self, spec):
        response = self.store.lookup("generate", spec.request())
        if not isinstance(response, list):
            raise DataError("generation replay response must be a list of texts")
        return [str(t) for t in response]


def _post_json(url: str, payload: dict, headers: dict, retries: int = 3, timeout: float = 60.0) -> dict:
    data = json.dumps(payload).encode("utf-8")
    delay = 1.0
    for attempt in range(1, retries + 1):
        req = urllib.request.Request(url, data=data, method="POST",
                                     headers={"Content-Type": "application/json", **headers})
        try:
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError) as exc:
            if attempt == retries:
                raise DataError(f"request to {url} failed after {retries} attempts: {exc}") from None
            log.warning("request to %s failed (%s); retrying in %.0fs", url, exc, delay)
            time.sleep(delay)
            delay *= 2
    raise AssertionError("unreachable")


class DeepLTranslationClient(TranslationClient):
    """Live translation over the DeepL HTTP API; optionally records into a store."""

    mode = "live"
    ENV_KEY = "DEEPL_API_KEY"

    def __init__(self, api_key: str, url: str = "https://api-free.deepl.com/v2/translate",
                 max_in_flight: int = 4, store: ReplayStore | None = None):
        self.api_key = api_key
        self.url = url
        self.max_in_flight = max(1, int(max_in_flight))
        self.store = store

    @classmethod
    def from_env(cls, **kwargs) -> "DeepLTranslationClient":
        key = os.environ.get(cls.ENV_KEY)
        if not key:
            raise ConfigError(f"live translation needs the {cls.ENV_KEY} environment variable")
        return cls(key, **kwargs)

    def _one(self, text, source_lang, target_lang):
        reply = _post_json(self.url, {"text": [text], "source_lang": source_lang.upper(),
                                      "target_lang": target_lang.upper()},
                           {"Authorization": f"DeepL-Auth-Key {self.api_key}"})
        out = reply["translations"][0]["text"]
        if self.store is not None:
            self.store.add("translate", translation_request(text, source_lang, target_lang), out)
        return out

    def translate(self, texts, source_lang, target_lang):
        # executor.map restores input order
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            return list(pool.map(lambda t: self._one(t, source_lang, target_lang), texts))


class ChatGenerationClient(GenerationClient):
    """Live generation through an OpenAI-compatible chat-completions endpoint."""

    mode = "live"
    ENV_KEY = "OPENAI_API_KEY"

    def __init__(self, api_key: str, url: str = "https://api.openai.com/v1/chat/completions",
                 store: ReplayStore | None = None):
        self.api_key = api_key
        self.url = url
        self.store = store

    @classmethod
    def from_env(cls, **kwargs) -> "ChatGenerationClient":
        key = os.environ.get(cls.ENV_KEY)
        if not key:
            raise ConfigError(f"live generation needs the {cls.ENV_KEY} environment variable")
        return cls(key, **kwargs)

    def generate(self, spec):
        prompt = spec.template.format(label=spec.label.value, count=spec.count)
        reply = _post_json(self.url, {"model": spec.model,
                                      "messages": [{"role": "user", "content": prompt}]},
                           {"Authorization": f"Bearer {self.api_key}"})
        content = reply["choices"][0]["message"]["content"]
        texts = [line.strip(" -*\t") for line in content.splitlines() if line.strip(" -*\t")]
        texts = texts[: spec.count]
        if self.store is not None:
            self.store.add("generate", spec.request(), texts)
        return texts


# ---------------------------------------------------------------- operations

@dataclass(frozen=True)
class SuiteItem:
    id: str
    text: str
    hate: HateLabel


def load_hate_suite(path) -> list[SuiteItem]:
    """Read a hate-speech test suite CSV.

    Accepts either ``case_id,test_case,label_gold`` (``hateful``/``non-hateful``)
    or ``id,text,hate`` (``1``/``0``).
    """
    items = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), 2):
            cid = row.get("case_id") or row.get("id")
            text = row.get("test_case") if "test_case" in row else row.get("text")
            gold = (row.get("label_gold") or row.get("hate") or "").strip().lower()
            if cid is None or text is None:
                raise DataError(f"{path}:{lineno}: need an id and a text column")
            if gold in ("hateful", "1"):
                hate = HateLabel.HATE
            elif gold in ("non-hateful", "0"):
                hate = HateLabel.NO_HATE
            else:
                raise DataError(f"{path}:{lineno}: unknown label {gold!r}")
            items.append(SuiteItem(str(cid).strip(), text, hate))
    return items


def back_translate_corpus(items: Sequence[SuiteItem], client: TranslationClient,
                          source_lang: str = "EN", target_lang: str = "DE",
                          round_trip: bool = False) -> list[LabeledComment]:
    """Translate labeled suite items into the target language, keeping their labels.

    With ``round_trip`` the translations additionally pass target -> source ->
    target, yielding paraphrases instead of direct translations.
    """
    texts = client.translate([it.text for it in items], source_lang, target_lang)
    if round_trip:
        texts = client.translate(client.translate(texts, target_lang, source_lang),
                                 source_lang, target_lang)
    if len(texts) != len(items):
        raise DataError(f"translation returned {len(texts)} texts for {len(items)} inputs")
    return [
        LabeledComment(Comment(f"bt-{it.id}", None, None, None, text), hate=it.hate,
                       origin=Origin.BACK_TRANSLATED)
        for it, text in zip(items, texts)
    ]


def generate_labeled(spec: GenerationSpec, client: GenerationClient,
                     cfg: PipelineConfig | None = None) -> list[LabeledComment]:
    """Request ``spec.count`` comments for one sentiment label; texts are stored normalized."""
    if spec.count < 1:
        raise ParameterError("generation count must be >= 1")
    texts = client.generate(spec)
    if len(texts) != spec.count:
        raise DataError(f"generator returned {len(texts)} texts, expected {spec.count}")
    tag = request_hash("generate", spec.request())[:8]
    return [
        LabeledComment(Comment(f"gen-{spec.label.value}-{tag}-{i:05d}", None, None, None,
                               normalize_text(t, cfg)),
                       sentiment=spec.label, origin=Origin.GENERATED)
        for i, t in enumerate(texts)
    ]
