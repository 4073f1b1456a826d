from pathlib import Path
from typing import Optional, Union

from src.errors import ImproperlyConfigured


class BaseRepository:
    """Persistence rooted at a directory on the local filesystem."""

    def __init__(self, root: Optional[Union[str, Path]] = None, create: bool = True):
        if root is None:
            raise ImproperlyConfigured(f"{type(self).__name__} needs a root directory.")
        self.root = Path(root)
        if create:
            self.root.mkdir(parents=True, exist_ok=True)
        elif not self.root.is_dir():
            raise ImproperlyConfigured(f"{self.root} is not a directory.")

    def path_for(self, name: Union[str, Path]) -> Path:
        path = Path(name)
        return path if path.is_absolute() else self.root / path
