"""Run manifests: reproducibility metadata for every pipeline command.

The manifest id hashes only the deterministic inputs (command, config,
template hashes, backend names, seed), never timestamps, so replayed runs
embed the same id and produce byte-identical output files. The full
manifest, timestamps included, goes to the progress stream.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from typing import Optional

from pydantic import BaseModel, ConfigDict


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, ensure_ascii=False,
                      separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(_canonical(config).encode("utf-8")).hexdigest()


class RunManifest(BaseModel):
    model_config = ConfigDict(frozen=True)

    command: str
    config_hash: str
    prompt_template_hashes: dict[str, str] = {}
    backend_names: list[str] = []
    seed: Optional[int] = None
    started_at: str = ""
    finished_at: Optional[str] = None

    @property
    def manifest_id(self) -> str:
        stable = {
            "command": self.command,
            "config_hash": self.config_hash,
            "prompt_template_hashes": self.prompt_template_hashes,
            "backend_names": self.backend_names,
            "seed": self.seed,
        }
        return hashlib.sha256(_canonical(stable).encode("utf-8")).hexdigest()[:16]


def start_manifest(command: str, config: dict,
                   prompt_template_hashes: Optional[dict[str, str]] = None,
                   backend_names: Optional[list[str]] = None,
                   seed: Optional[int] = None) -> RunManifest:
    return RunManifest(
        command=command,
        config_hash=config_hash(config),
        prompt_template_hashes=prompt_template_hashes or {},
        backend_names=backend_names or [],
        seed=seed,
        started_at=datetime.now(timezone.utc).isoformat(),
    )
