import hashlib
import logging
from typing import Optional, Tuple

import numpy as np

from src.repositories.base import BaseRepository

logger = logging.getLogger(__name__)


class SpectrumCache(BaseRepository):
    """Dense eigen-decompositions keyed by the SHA-256 of the matrix bytes."""

    @staticmethod
    def key(matrix: np.ndarray) -> str:
        digest = hashlib.sha256()
        digest.update(str(matrix.shape).encode())
        digest.update(np.ascontiguousarray(matrix, dtype=np.complex128).tobytes())
        return digest.hexdigest()

    def get(self, matrix: np.ndarray) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        path = self.path_for(f"{self.key(matrix)}.npz")
        if not path.exists():
            return None
        try:
            with np.load(path) as data:
                return data["eigenvalues"], data["eigenvectors"]
        except (OSError, KeyError, ValueError) as e:
            logger.warning(f"Ignoring unreadable cache entry {path}: {e}")
            return None

    def put(self, matrix: np.ndarray, eigenvalues: np.ndarray, eigenvectors: np.ndarray) -> None:
        path = self.path_for(f"{self.key(matrix)}.npz")
        np.savez(path, eigenvalues=eigenvalues, eigenvectors=eigenvectors)
        logger.info(f"Cached spectrum {path.name}")
