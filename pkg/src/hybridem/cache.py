"""Content-addressed cache for structure factorizations.

Layout: ``<root>/<digest>/{zlu.bin, zpiv.bin, g.bin}`` in HEM1 format. The
digest is SHA-256 over the mesh bytes, material, frequency, wave truncation
and antenna frame, so entries never need invalidation.
"""

from __future__ import annotations

import hashlib
import logging
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from . import formats
from .geometry import TriangleMesh
from .wigner import Frame

logger = logging.getLogger(__name__)

CACHE_ENV = "HYBRIDEM_CACHE_DIR"
DEFAULT_CACHE_DIR = "./cache"


def cache_root() -> Path:
    return Path(os.environ.get(CACHE_ENV, DEFAULT_CACHE_DIR))


def structure_digest(
    mesh: TriangleMesh, frequency: float, l_max: int, frame: Frame
) -> str:
    h = hashlib.sha256()
    h.update(mesh.content_bytes())
    h.update(mesh.material.describe().encode("utf-8"))
    h.update(np.array([frequency], dtype="<f8").tobytes())
    h.update(np.array([l_max], dtype="<i8").tobytes())
    h.update(np.array(frame.origin + frame.euler, dtype="<f8").tobytes())
    return h.hexdigest()


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0
    writes: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def bump(self, name: str) -> None:
        with self._lock:
            setattr(self, name, getattr(self, name) + 1)

    def as_dict(self) -> Dict[str, int]:
        with self._lock:
            return {"hits": self.hits, "misses": self.misses, "writes": self.writes}


@dataclass
class HybridCache:
    root: Path = field(default_factory=cache_root)
    enabled: bool = True
    stats: CacheStats = field(default_factory=CacheStats)

    def entry(self, digest: str) -> Path:
        return Path(self.root) / digest

    def load_factor(self, digest: str) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        path = self.entry(digest)
        if not (self.enabled and (path / "zlu.bin").exists() and (path / "zpiv.bin").exists()):
            self.stats.bump("misses")
            return None
        lu = formats.read_hem(path / "zlu.bin")
        piv = formats.read_hem(path / "zpiv.bin").real.astype(np.int32).ravel()
        self.stats.bump("hits")
        logger.info("cache hit: LU %s", digest[:12])
        return lu, piv

    def store_factor(self, digest: str, lu: np.ndarray, piv: np.ndarray) -> None:
        if not self.enabled:
            return
        path = self.entry(digest)
        formats.write_hem(path / "zlu.bin", lu)
        formats.write_hem(path / "zpiv.bin", np.asarray(piv, dtype=float))
        self.stats.bump("writes")

    def load_g(self, digest: str) -> Optional[np.ndarray]:
        path = self.entry(digest) / "g.bin"
        if not (self.enabled and path.exists()):
            self.stats.bump("misses")
            return None
        self.stats.bump("hits")
        logger.info("cache hit: G %s", digest[:12])
        return formats.read_hem(path)

    def store_g(self, digest: str, g: np.ndarray) -> None:
        if not self.enabled:
            return
        formats.write_hem(self.entry(digest) / "g.bin", g)
        self.stats.bump("writes")
