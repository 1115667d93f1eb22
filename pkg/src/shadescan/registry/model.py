from __future__ import annotations

import enum
from dataclasses import dataclass, field

from shadescan.coords import Gav


class BlobKind(str, enum.Enum):
    POM = "pom"
    SOURCES = "sources-archive"
    BINARY = "binary-archive"

    @property
    def classifier(self) -> str | None:
        return "sources" if self is BlobKind.SOURCES else None

    @property
    def extension(self) -> str:
        return "pom" if self is BlobKind.POM else "jar"


class Origin(str, enum.Enum):
    NETWORK = "network"
    CACHE = "cache"
    FIXTURE = "fixture"


@dataclass(frozen=True)
class RegistryBlob:
    gav: Gav
    kind: BlobKind
    data: bytes = field(repr=False)
    origin: Origin


@dataclass(frozen=True)
class QueryPage:
    class_name: str
    page_index: int
    page_size: int
    results: tuple[Gav, ...]

    def __post_init__(self) -> None:
        if self.page_size <= 0:
            raise ValueError("page_size must be positive")
        if len(self.results) > self.page_size:
            raise ValueError("page holds more results than its page size")
