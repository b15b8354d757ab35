"""
스테이지 완료 manifest

run 디렉토리 아래 .manifest (diskcache) 에 스테이지별 hash 와 산출물을 기록해
재실행 시 완료된 스테이지를 건너뜁니다.
"""

import hashlib
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

from diskcache import Cache

from common.utils import dumps_sorted

MANIFEST_DIR = ".manifest"


def stage_digest(fingerprint: Dict[str, Any], dependency_digests: Iterable[str]) -> str:
    """스테이지 입력 + 의존 스테이지 hash 의 SHA-256 앞 16자"""
    payload = dumps_sorted({"stage": fingerprint, "deps": list(dependency_digests)})
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


class StageManifest:
    """
    스테이지 완료 기록

    Example:
        with StageManifest(run_dir) as manifest:
            artifacts = manifest.lookup("bc-hd", digest, outputs)
            if artifacts is None:
                artifacts = stage.execute(ctx)
                manifest.record("bc-hd", digest, artifacts)
    """

    def __init__(self, run_dir: Union[str, Path]):
        self.path = Path(run_dir) / MANIFEST_DIR
        self.cache = Cache(str(self.path))

    def lookup(self, name: str, digest: str, outputs: Iterable[Path]) -> Optional[Dict[str, Any]]:
        """hash 가 같고 산출물이 모두 남아 있으면 기록된 산출물, 아니면 None"""
        entry = self.cache.get(name)
        if entry is None or entry.get("digest") != digest:
            return None
        if not all(Path(p).exists() for p in outputs):
            return None
        return dict(entry["artifacts"])

    def record(self, name: str, digest: str, artifacts: Dict[str, Any]) -> None:
        self.cache.set(name, {"digest": digest, "artifacts": dict(artifacts)})

    def invalidate(self, name: str) -> None:
        self.cache.delete(name)

    def completed(self) -> Dict[str, str]:
        """스테이지 이름 → hash"""
        return {key: self.cache[key]["digest"] for key in sorted(self.cache.iterkeys())}

    def close(self) -> None:
        self.cache.close()

    def __enter__(self) -> "StageManifest":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
