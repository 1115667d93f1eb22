"""Detect vulnerable clones and shaded copies of Maven artifacts.

The pipeline fingerprints an original artifact by its most distinctive
class names, queries a registry for artifacts sharing those names, filters
out declared dependents, runs a type-2 clone check on sources, and finally
confirms each clone by running a proof-of-vulnerability project against it.
"""

from shadescan.coords import Ga, Gav

__all__ = ["Ga", "Gav"]
__version__ = "0.1.0"
