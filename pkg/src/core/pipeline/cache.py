"""
磁盘缓存：<cache>/<stage>/<stage_hash>.npz 加同名 .json 旁注。
只有旁注记录的阶段哈希与当前一致时才复用。
"""
import json
import logging
import os
import zipfile
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from src import ENV

logger = logging.getLogger(__name__)


class ArtifactCache:
    def __init__(self, root: Optional[str] = None):
        self.root = Path(root or ENV.get_cache_dir())

    def _paths(self, stage: str, key: str):
        folder = self.root / stage
        return folder / f"{key}.npz", folder / f"{key}.json"

    def load(self, stage: str, key: str) -> Optional[Dict[str, np.ndarray]]:
        bundle, sidecar = self._paths(stage, key)
        if not (bundle.exists() and sidecar.exists()):
            return None
        try:
            meta = json.loads(sidecar.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            logger.warning("缓存旁注损坏 %s: %s", sidecar, e)
            return None
        if meta.get("stage") != stage or meta.get("stage_hash") != key:
            logger.warning("缓存旁注与阶段哈希不符，忽略 %s", bundle)
            return None
        try:
            with np.load(bundle, allow_pickle=False) as data:
                arrays = {name: data[name] for name in data.files}
        except (OSError, ValueError, EOFError, zipfile.BadZipFile) as e:
            logger.warning("缓存文件损坏 %s，重新计算: %s", bundle, e)
            return None
        logger.info("复用缓存 %s/%s", stage, key[:12])
        return arrays

    def save(self, stage: str, key: str, arrays: Dict[str, np.ndarray], upstream: Optional[str] = None):
        bundle, sidecar = self._paths(stage, key)
        bundle.parent.mkdir(parents=True, exist_ok=True)
        tmp = bundle.with_name(bundle.stem + f".{os.getpid()}.tmp.npz")
        np.savez(tmp, **arrays)
        os.replace(tmp, bundle)
        sidecar.write_text(json.dumps({"stage": stage, "stage_hash": key, "upstream": upstream}, indent=2), encoding="utf-8")
        logger.debug("写入缓存 %s/%s", stage, key[:12])
