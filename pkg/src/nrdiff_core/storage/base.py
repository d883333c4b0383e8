"""Result sink interfaces."""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any, Mapping


class ResultSink(ABC):
    """Append-only destination for experiment rows."""

    @abstractmethod
    def record(self, row: Mapping[str, Any]) -> None:
        """Persist one row."""
