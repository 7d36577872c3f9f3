"""Run configuration: defaults < config file < RMF_* env < CLI flags.

A config file is plain ``key=value`` lines (``#`` comments allowed).  Any
key can be overridden by an environment variable named ``RMF_<KEY>`` in
upper case, and by an explicit command-line flag.  Every command writes a
resolved snapshot (sorted key=value lines plus the seed, the active kernel
lanes and a sha256 config hash) next to its outputs, so a run can be
reproduced and two runs can be diffed.  Reruns with an equal resolved
config produce byte-identical artifacts.
"""

from __future__ import annotations

import hashlib
import os
from pathlib import Path
from typing import Mapping

from . import kernels
from .errors import ConfigError

ENV_PREFIX = "RMF_"

DEFAULTS: dict[str, str] = {
    "resolutions": "160,224,320",
    "pooling": "mac",
    "scales": "4",
    "k": "1024",
    "dim": "256",
    "sample": "30000",
    "kmeans_sample": "0",
    "seed": "0",
    "jobs": "1",
    "topk": "100",
    "stride": "16",
    "channels": "1024",
    "stub_seed": "0",
    "eps": "1e-6",
    "exclude_self": "1",
    "multires": "1",
    "attention": "0",
    "mode": "stub",
    "model": "",
}


def load_config_file(path: str | Path) -> dict[str, str]:
    out: dict[str, str] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{line_no}: expected key=value, got {stripped!r}")
        key, value = stripped.split("=", 1)
        out[key.strip()] = value.strip()
    return out


class RunConfig:
    """Resolved string key/value configuration with typed accessors."""

    def __init__(self, values: Mapping[str, str]):
        self.values = dict(values)

    @classmethod
    def resolve(
        cls,
        cli: Mapping[str, str | None] | None = None,
        config_file: str | Path | None = None,
        env: Mapping[str, str] | None = None,
    ) -> "RunConfig":
        env = os.environ if env is None else env
        merged = dict(DEFAULTS)
        if config_file is not None:
            merged.update(load_config_file(config_file))
        for key in list(merged):
            env_key = ENV_PREFIX + key.upper()
            if env_key in env:
                merged[key] = env[env_key]
        if cli:
            for key, value in cli.items():
                if value is not None:
                    merged[key] = str(value)
        return cls(merged)

    def get(self, key: str) -> str:
        try:
            return self.values[key]
        except KeyError:
            raise ConfigError(f"missing config key {key!r}") from None

    def get_int(self, key: str) -> int:
        try:
            return int(self.get(key))
        except ValueError:
            raise ConfigError(f"config key {key!r} must be an integer, got {self.get(key)!r}") from None

    def get_float(self, key: str) -> float:
        try:
            return float(self.get(key))
        except ValueError:
            raise ConfigError(f"config key {key!r} must be a number, got {self.get(key)!r}") from None

    def get_bool(self, key: str) -> bool:
        text = self.get(key).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config key {key!r} must be boolean-like, got {text!r}")

    def get_int_list(self, key: str) -> tuple[int, ...]:
        text = self.get(key)
        try:
            return tuple(int(p) for p in text.split(",") if p.strip())
        except ValueError:
            raise ConfigError(f"config key {key!r} must be comma-separated ints, got {text!r}") from None

    def canonical(self) -> str:
        return "".join(f"{k}={self.values[k]}\n" for k in sorted(self.values))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    def write_snapshot(self, out_dir: str | Path, command: str) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{command}.resolved.cfg"
        lanes = ",".join(f"{k}:{v}" for k, v in sorted(kernels.active_lanes().items()))
        body = self.canonical() + f"# config_hash={self.config_hash()}\n# kernel_lanes={lanes}\n"
        path.write_text(body, encoding="utf-8")
        return path
