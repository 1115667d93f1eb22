"""Maven coordinates."""

from __future__ import annotations

import re
from dataclasses import dataclass

_FORBIDDEN = re.compile(r"[\s:]")


def _check(field: str, value: str) -> None:
    if not isinstance(value, str) or not value:
        raise ValueError(f"{field} must be a non-empty string")
    if _FORBIDDEN.search(value):
        raise ValueError(f"{field} {value!r} contains whitespace or ':'")


@dataclass(frozen=True, order=True)
class Ga:
    group: str
    artifact: str

    def __post_init__(self) -> None:
        _check("group", self.group)
        _check("artifact", self.artifact)

    def __str__(self) -> str:
        return f"{self.group}:{self.artifact}"

    @classmethod
    def parse(cls, text: str) -> Ga:
        parts = text.strip().split(":")
        if len(parts) != 2:
            raise ValueError(f"expected group:artifact, got {text!r}")
        return cls(*parts)


@dataclass(frozen=True, order=True)
class Gav:
    """A group/artifact/version triple identifying one registry artifact."""

    group: str
    artifact: str
    version: str

    def __post_init__(self) -> None:
        _check("group", self.group)
        _check("artifact", self.artifact)
        _check("version", self.version)

    def __str__(self) -> str:
        return f"{self.group}:{self.artifact}:{self.version}"

    @classmethod
    def parse(cls, text: str) -> Gav:
        parts = text.strip().split(":")
        if len(parts) != 3:
            raise ValueError(f"expected group:artifact:version, got {text!r}")
        return cls(*parts)

    @property
    def ga(self) -> Ga:
        return Ga(self.group, self.artifact)

    def repository_dir(self) -> str:
        """Directory of this artifact in the standard repository layout."""
        return "/".join([*self.group.split("."), self.artifact, self.version])

    def repository_path(self, classifier: str | None = None, ext: str = "jar") -> str:
        name = f"{self.artifact}-{self.version}"
        if classifier:
            name += f"-{classifier}"
        return f"{self.repository_dir()}/{name}.{ext}"
