"""Run configuration: one flat TOML file, flag overrides win.

Endpoints may also come from the environment (SILK_LOOKUP_URL,
SILK_EMBED_URL); everything else lives in the config so the manifest's
config hash pins a run completely.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .corpus import SECTION_LABELS

DEFAULT_SECTIONS = ("intro", "related_work")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    corpus: str | None = None
    stoplist: str | None = None
    cache: str | None = None
    output_dir: str = "out"
    sections: tuple[str, ...] = DEFAULT_SECTIONS
    alpha_table: dict[int, float] = field(default_factory=lambda: {1: 1.0, 2: 1.5, 3: 2.0})
    lambda_x: float = 0.85
    lambda_r: float = 0.75
    min_kp: int = 3
    max_kp: int = 5
    max_content_kp: int = 3
    max_phrase_len: int = 5
    stoplist_df: float | None = None
    top_n: int = 1000
    embedder: str = "hash:256"
    seed: int = 13
    lookup_url: str | None = None
    allow_external: bool = False
    tagger: str = "rule"  # rule | passthrough
    lexicon: str | None = None
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not (0.0 < self.lambda_x <= 1.0):
            raise ConfigError(f"lambda_x must lie in (0, 1], got {self.lambda_x}")
        if not (0.0 < self.lambda_r <= 1.0):
            raise ConfigError(f"lambda_r must lie in (0, 1], got {self.lambda_r}")
        if self.top_n < 0:
            raise ConfigError("top_n must be >= 0")
        if not (0 < self.min_kp <= self.max_kp):
            raise ConfigError("need 0 < min_kp <= max_kp")
        if self.max_content_kp > self.max_kp:
            raise ConfigError("max_content_kp cannot exceed max_kp")
        if self.max_phrase_len < 1:
            raise ConfigError("max_phrase_len must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.tagger not in ("rule", "passthrough"):
            raise ConfigError(f"unknown tagger {self.tagger!r}")
        for section in self.sections:
            if section not in SECTION_LABELS:
                raise ConfigError(f"unknown section label {section!r}")
        if sorted(self.alpha_table) != [1, 2, 3]:
            raise ConfigError("alpha_table needs exactly the keys 1, 2, 3")

    def to_dict(self) -> dict:
        data = asdict(self)
        data["sections"] = list(self.sections)
        data["alpha_table"] = {str(k): v for k, v in self.alpha_table.items()}
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "sections" in kwargs:
            kwargs["sections"] = tuple(kwargs["sections"])
        if "alpha_table" in kwargs:
            kwargs["alpha_table"] = {int(k): float(v) for k, v in kwargs["alpha_table"].items()}
        return cls(**kwargs)

    def sha256(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """Config file plus flag overrides (overrides win, None means unset)."""
    data: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fp:
                data = tomllib.load(fp)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"bad config file {path}: {exc}") from exc
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    config = RunConfig.from_dict(data)
    if config.lookup_url is None:
        config.lookup_url = os.environ.get("SILK_LOOKUP_URL") or None
    if config.embedder in ("remote", "remote:"):
        embed_url = os.environ.get("SILK_EMBED_URL")
        if not embed_url:
            raise ConfigError("embedder 'remote' needs a URL (remote:<url> or SILK_EMBED_URL)")
        config.embedder = f"remote:{embed_url}"
    return config


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fp:
        for block in iter(lambda: fp.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(artifact: str | Path, config: RunConfig, inputs: list[str | Path], version: str) -> Path:
    """Sidecar manifest enabling byte-identical reruns."""
    manifest = {
        "config_sha256": config.sha256(),
        "inputs": {str(p): file_sha256(p) for p in sorted(str(i) for i in inputs)},
        "version": version,
    }
    path = Path(str(artifact) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
