"""Service configuration from file (YAML or JSON) and environment variables.

Environment overrides: LABELLOOP_DATA_ROOT, LABELLOOP_PORT,
LABELLOOP_EMBEDDINGS, and LABELLOOP_POLICY_<FIELD> for any policy field
(e.g. LABELLOOP_POLICY_RETRAIN_LABEL_DELTA=10).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import yaml

from ..policy import PolicyConfig

ENV_PREFIX = "LABELLOOP_"


@dataclass
class ServiceConfig:
    data_root: Path = Path("labelloop-data")
    port: int = 8234
    embedding_path: Path | None = None
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    max_training_workers: int = 1

    @classmethod
    def load(
        cls, path: Path | str | None = None, env: Mapping[str, str] | None = None
    ) -> "ServiceConfig":
        env = os.environ if env is None else env
        data: dict = {}
        if path is not None:
            text = Path(path).read_text("utf-8")
            if str(path).endswith(".json"):
                data = json.loads(text)
            else:
                data = yaml.safe_load(text) or {}
        policy_overrides = dict(data.get("policy") or {})
        for key, value in env.items():
            if key == f"{ENV_PREFIX}DATA_ROOT":
                data["data_root"] = value
            elif key == f"{ENV_PREFIX}PORT":
                data["port"] = int(value)
            elif key == f"{ENV_PREFIX}EMBEDDINGS":
                data["embedding_path"] = value
            elif key.startswith(f"{ENV_PREFIX}POLICY_"):
                policy_overrides[key[len(f"{ENV_PREFIX}POLICY_") :].lower()] = value
        return cls(
            data_root=Path(data.get("data_root", "labelloop-data")),
            port=int(data.get("port", 8234)),
            embedding_path=Path(data["embedding_path"]) if data.get("embedding_path") else None,
            policy=PolicyConfig.from_mapping(policy_overrides),
            max_training_workers=int(data.get("max_training_workers", 1)),
        )
