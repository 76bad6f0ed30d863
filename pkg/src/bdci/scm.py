"""Version-control plumbing: resolve the versions a trigger policy wants
compared, find latest common ancestors, and materialize working trees.

All repository access goes through an external git-compatible tool, invoked
as a subprocess.  The tool path comes from the BDCI_GIT environment
variable (default ``git``).  Required commands: ``rev-parse --verify``,
``merge-base [--all|--is-ancestor]``, ``archive --format=tar`` and
``for-each-ref``.
"""

from __future__ import annotations

import io
import logging
import os
import subprocess
import tarfile
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

logger = logging.getLogger(__name__)

GIT_ENV_VAR = "BDCI_GIT"


class ScmError(Exception):
    pass


class ToolError(ScmError):
    pass


class RevisionError(ScmError):
    pass


class NoAncestorError(ScmError):
    pass


class WorkdirError(ScmError):
    pass


class PlanError(ScmError):
    pass


class Role(Enum):
    BASE = "BASE"
    BRANCH = "BRANCH"


@dataclass(frozen=True)
class VersionRef:
    repo: str
    rev: str          # fully resolved commit id
    role: Role
    name: str = ""    # the branch name or rev spec the ref came from

    def short(self) -> str:
        return self.name or self.rev[:12]


@dataclass(frozen=True)
class TreeHandle:
    rev: str
    path: str


@dataclass(frozen=True)
class ComparisonPlan:
    triples: tuple[tuple[VersionRef, VersionRef, VersionRef], ...]


@dataclass(frozen=True)
class OnCommit:
    committed: str


@dataclass(frozen=True)
class OnMergeRequest:
    a: str
    b: str


@dataclass(frozen=True)
class Nightly:
    pass


Policy = OnCommit | OnMergeRequest | Nightly


class GitAdapter:
    """Thin wrapper over the external version-control tool."""

    def __init__(self, repo: str | Path, tool: str | None = None):
        self.repo = str(repo)
        self.tool = tool or os.environ.get(GIT_ENV_VAR, "git")

    def _run(self, *args: str, binary: bool = False) -> str | bytes:
        proc = subprocess.run([self.tool, "-C", self.repo, *args],
                              capture_output=True)
        if proc.returncode != 0:
            raise ToolError(f"{self.tool} {' '.join(args)}: "
                            f"{proc.stderr.decode(errors='replace').strip()}")
        return proc.stdout if binary else proc.stdout.decode()

    def resolve(self, rev: str) -> str:
        try:
            out = self._run("rev-parse", "--verify", f"{rev}^{{commit}}")
        except ToolError as exc:
            raise RevisionError(f"cannot resolve {rev!r} in {self.repo}: {exc}") from exc
        return out.strip()

    def merge_bases(self, rev_a: str, rev_b: str) -> list[str]:
        proc = subprocess.run([self.tool, "-C", self.repo, "merge-base", "--all",
                               rev_a, rev_b], capture_output=True, text=True)
        if proc.returncode != 0:
            return []
        return proc.stdout.split()

    def is_ancestor(self, maybe_ancestor: str, rev: str) -> bool:
        proc = subprocess.run([self.tool, "-C", self.repo, "merge-base",
                               "--is-ancestor", maybe_ancestor, rev],
                              capture_output=True)
        return proc.returncode == 0

    def branch_heads(self) -> list[str]:
        out = self._run("for-each-ref", "refs/heads", "--format=%(refname:short)")
        return [line for line in out.splitlines() if line]

    def archive(self, rev: str) -> bytes:
        return self._run("archive", "--format=tar", rev, binary=True)  # type: ignore[return-value]


def latest_common_ancestor(repo: str | Path | GitAdapter,
                           rev_a: str, rev_b: str) -> VersionRef:
    """Merge-base of the two revisions.  Multiple candidates (criss-cross
    history) take the first reported one with a warning."""
    adapter = repo if isinstance(repo, GitAdapter) else GitAdapter(repo)
    sha_a, sha_b = adapter.resolve(rev_a), adapter.resolve(rev_b)
    bases = adapter.merge_bases(sha_a, sha_b)
    if not bases:
        raise NoAncestorError(f"{rev_a} and {rev_b} have no common ancestor")
    if len(bases) > 1:
        logger.warning("criss-cross history: %d merge bases for %s..%s; taking %s",
                       len(bases), rev_a, rev_b, bases[0][:12])
    return VersionRef(adapter.repo, bases[0], Role.BASE)


def materialize(repo: str | Path | GitAdapter, rev: str,
                workdir: str | Path) -> TreeHandle:
    """Extract the committed tree of ``rev`` into ``workdir`` (which must be
    empty or absent)."""
    adapter = repo if isinstance(repo, GitAdapter) else GitAdapter(repo)
    workdir = Path(workdir)
    if workdir.exists():
        if not workdir.is_dir():
            raise WorkdirError(f"{workdir} exists and is not a directory")
        if any(workdir.iterdir()):
            raise WorkdirError(f"refusing to materialize into non-empty {workdir}")
    else:
        workdir.mkdir(parents=True)
    sha = adapter.resolve(rev)
    data = adapter.archive(sha)
    with tarfile.open(fileobj=io.BytesIO(data)) as tar:
        tar.extractall(workdir)
    return TreeHandle(sha, str(workdir))


def plan_comparisons(repo: str | Path | GitAdapter, policy: Policy,
                     branches: list[str]) -> ComparisonPlan:
    """Resolve the (base, a, b) triples a trigger policy asks for.

    ON_COMMIT compares the committed branch against every other branch;
    ON_MERGE_REQUEST compares exactly the named pair; NIGHTLY compares all
    unordered branch-head pairs.
    """
    adapter = repo if isinstance(repo, GitAdapter) else GitAdapter(repo)
    if not branches:
        raise PlanError("branch list is empty")

    def branch_ref(name: str) -> VersionRef:
        return VersionRef(adapter.repo, adapter.resolve(name), Role.BRANCH, name)

    def triple(a: str, b: str) -> tuple[VersionRef, VersionRef, VersionRef]:
        ref_a, ref_b = branch_ref(a), branch_ref(b)
        base = latest_common_ancestor(adapter, ref_a.rev, ref_b.rev)
        for ref in (ref_a, ref_b):
            if not adapter.is_ancestor(base.rev, ref.rev):
                raise PlanError(f"{base.rev[:12]} is not an ancestor of {ref.short()}")
        return (base, ref_a, ref_b)

    if isinstance(policy, OnCommit):
        if policy.committed not in branches:
            raise PlanError(f"committed rev {policy.committed!r} is not a listed branch")
        triples = [triple(policy.committed, other)
                   for other in branches if other != policy.committed]
    elif isinstance(policy, OnMergeRequest):
        for rev in (policy.a, policy.b):
            if rev not in branches:
                raise PlanError(f"{rev!r} is not a listed branch")
        triples = [triple(policy.a, policy.b)]
    elif isinstance(policy, Nightly):
        triples = [triple(a, b)
                   for i, a in enumerate(branches) for b in branches[i + 1:]]
    else:
        raise PlanError(f"unknown policy {policy!r}")
    return ComparisonPlan(tuple(triples))
