import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Union

import pandas as pd

from src.models.base import jsonable
from src.repositories.base import BaseRepository

logger = logging.getLogger(__name__)


def canonical_json(payload: Any) -> str:
    return json.dumps(jsonable(payload), sort_keys=True, separators=(",", ":"), allow_nan=False)


def payload_hash(payload: Any) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


class ReportRepository(BaseRepository):
    """JSON reports and CSV series under an output directory.

    Every JSON report is ``{"payload", "hash", "metadata"}``. The hash covers
    the payload only, so timestamps in the metadata never change it.
    """

    def save_report(self, name: str, payload: Mapping[str, Any], metadata: Optional[Dict[str, Any]] = None) -> Path:
        document = {
            "payload": jsonable(payload),
            "hash": payload_hash(payload),
            "metadata": jsonable(metadata or {}),
        }
        path = self.path_for(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(document, f, sort_keys=True, indent=2, allow_nan=False)
            f.write("\n")
        logger.info(f"Report saved to {path} (hash {document['hash'][:12]})")
        return path

    def load_report(self, name: str) -> Dict[str, Any]:
        with open(self.path_for(name), encoding="utf-8") as f:
            return json.load(f)

    def save_series(self, name: str, rows: Union[pd.DataFrame, Iterable[Mapping[str, Any]]]) -> Path:
        df = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
        path = self.path_for(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False)
        logger.info(f"Series saved to {path} ({len(df)} rows)")
        return path
