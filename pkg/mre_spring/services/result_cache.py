import json
import logging
import os
import tempfile
from collections import OrderedDict
from pathlib import Path
from typing import Optional, Union

from ..core.energy_torque import CoenergySample

logger = logging.getLogger(__name__)


class ResultCache:
    """
    θ 样本缓存：内容哈希为键，文件存储 + 内存 LRU

    文件写入先写临时文件再 os.replace，并发运行共享同一目录也不会产生残缺条目。
    """

    def __init__(self, cache_dir: Union[str, Path], max_size: int = 64):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.max_size = max_size
        self.memory = OrderedDict()  # 键：内容哈希，值：CoenergySample
        self.hits = 0
        self.misses = 0

    def path_for(self, key: str) -> Path:
        return self.cache_dir / f"{key}.json"

    def _remember(self, key: str, sample: CoenergySample):
        if key in self.memory:
            self.memory.move_to_end(key)
            return
        # 缓存已满时淘汰最久未使用的条目
        if len(self.memory) >= self.max_size:
            lru_key, _ = self.memory.popitem(last=False)
            logger.debug(f"[ ResultCache ] LRU淘汰: {lru_key[:12]}")
        self.memory[key] = sample

    def get(self, key: str) -> Optional[CoenergySample]:
        """命中时返回与原始计算逐位相同的样本"""
        if key in self.memory:
            self.memory.move_to_end(key)
            self.hits += 1
            return self.memory[key]
        path = self.path_for(key)
        if not path.exists():
            self.misses += 1
            return None
        try:
            sample = CoenergySample.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except (OSError, ValueError, KeyError, TypeError) as e:
            logger.warning(f"[ ResultCache ] 缓存文件损坏, 忽略: {path} ({e})")
            self.misses += 1
            return None
        self._remember(key, sample)
        self.hits += 1
        return sample

    def put(self, key: str, sample: CoenergySample) -> None:
        text = json.dumps(sample.to_dict(), sort_keys=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{key[:12]}-", suffix=".tmp", dir=self.cache_dir)
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                f.write(text)
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp_name, self.path_for(key))
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
        self._remember(key, sample)

    def __len__(self):
        """当前内存缓存大小"""
        return len(self.memory)
