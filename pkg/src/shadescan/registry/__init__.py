"""Uniform access to a package registry with caching and a fixture backend."""

from shadescan.registry.backends import FixtureBackend, LiveBackend
from shadescan.registry.cache import ResponseCache, default_cache_dir
from shadescan.registry.client import RegistryClient, check_archive
from shadescan.registry.model import BlobKind, Origin, QueryPage, RegistryBlob

__all__ = [
    "BlobKind",
    "FixtureBackend",
    "LiveBackend",
    "Origin",
    "QueryPage",
    "RegistryBlob",
    "RegistryClient",
    "ResponseCache",
    "check_archive",
    "default_cache_dir",
]
