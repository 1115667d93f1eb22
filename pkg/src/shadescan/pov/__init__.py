"""Proof-of-vulnerability projects: load, retarget at a clone, build, and judge."""

from shadescan.pov.instantiate import PovInstance, instantiate, rewrite_java_source, rewrite_pom_text, rewrite_workspace
from shadescan.pov.project import PovProject, load_pov
from shadescan.pov.runner import BuildOutcome, MavenRunner, StubRunner, run_build
from shadescan.pov.surefire import TestOutcome, parse_surefire, render_surefire
from shadescan.pov.verify import VerificationResult, evaluate_outcomes, verify

__all__ = [
    "BuildOutcome",
    "MavenRunner",
    "PovInstance",
    "PovProject",
    "StubRunner",
    "TestOutcome",
    "VerificationResult",
    "evaluate_outcomes",
    "instantiate",
    "load_pov",
    "parse_surefire",
    "render_surefire",
    "rewrite_java_source",
    "rewrite_pom_text",
    "rewrite_workspace",
    "run_build",
    "verify",
]
