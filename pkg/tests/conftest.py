from __future__ import annotations

import shutil
import subprocess
from pathlib import Path

import pytest

from bdci.miner import mine_properties
from bdci.trace import load_trace, program_points, samples_at

REPO_ROOT = Path(__file__).resolve().parent.parent
CORPUS = REPO_ROOT / "corpus" / "running_example"
GOLDEN = Path(__file__).resolve().parent / "golden"

CORPUS_VERSIONS = {"base": "base", "v1": "version1", "v2": "version2",
                   "refactor": "refactor"}


def have_cc() -> bool:
    return shutil.which("cc") is not None or shutil.which("gcc") is not None


requires_cc = pytest.mark.skipif(not have_cc(), reason="needs a C compiler for the corpus")


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS


def run_corpus_version(version_dir: Path, tracedir: Path, label: str) -> Path:
    """Build one corpus version and return its trace file path."""
    subprocess.run(["sh", str(CORPUS / "runtests.sh"), str(version_dir),
                    str(tracedir), label], check=True, capture_output=True)
    return tracedir / "run.trace"


@pytest.fixture(scope="session")
def corpus_traces(tmp_path_factory) -> dict:
    """Parsed trace logs of all four corpus versions."""
    if not have_cc():
        pytest.skip("needs a C compiler for the corpus")
    root = tmp_path_factory.mktemp("corpus-traces")
    traces = {}
    for label, dirname in CORPUS_VERSIONS.items():
        path = run_corpus_version(CORPUS / dirname, root / label, label)
        traces[label] = load_trace(path)
    return traces


@pytest.fixture(scope="session")
def corpus_props(corpus_traces) -> dict:
    """Mined property maps (point -> PropertySet) of all corpus versions."""
    props = {}
    for label, trace in corpus_traces.items():
        props[label] = {pp: mine_properties(list(samples_at(trace, pp)))
                        for pp in program_points(trace)}
    return props


def git(repo: Path, *args: str) -> str:
    proc = subprocess.run(
        ["git", "-C", str(repo), "-c", "user.email=tests@example.net",
         "-c", "user.name=tests", *args],
        check=True, capture_output=True, text=True)
    return proc.stdout.strip()


def commit_tree(repo: Path, src: Path, message: str) -> str:
    for old in list(repo.glob("*.c")) + list(repo.glob("*.h")):
        old.unlink()
    for f in sorted(src.iterdir()):
        if f.is_file():
            shutil.copy(f, repo / f.name)
    git(repo, "add", "-A")
    git(repo, "commit", "--quiet", "-m", message)
    return git(repo, "rev-parse", "HEAD")


@pytest.fixture()
def corpus_repo(tmp_path) -> Path:
    """Fixture repository: base on main, the two changes on branches v1/v2."""
    repo = tmp_path / "repo"
    repo.mkdir()
    git(repo, "init", "--quiet", "-b", "main")
    commit_tree(repo, CORPUS / "base", "base version")
    git(repo, "branch", "v1")
    git(repo, "branch", "v2")
    git(repo, "checkout", "--quiet", "v1")
    commit_tree(repo, CORPUS / "version1", "discount policy change")
    git(repo, "checkout", "--quiet", "v2")
    commit_tree(repo, CORPUS / "version2", "drop taxes from total")
    git(repo, "checkout", "--quiet", "main")
    return repo
