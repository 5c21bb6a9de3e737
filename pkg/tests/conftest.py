"""Shared session fixtures.

Default datasets (and the trained models used by the acceptance suite) are
cached under pytest's cache directory, keyed by a digest of the package
sources, so repeated runs skip the expensive integrations. Set
``LATENTFLOW_NO_CACHE=1`` to force a fresh computation.
"""

import hashlib
import os
from pathlib import Path

import pytest

import latentflow
from latentflow.dataset import generate_dataset, load_dataset, save_dataset

EQUATIONS = ("ks", "fkdv", "sg")


def _source_digest() -> str:
    h = hashlib.sha256()
    root = Path(latentflow.__file__).parent
    for path in sorted(root.glob("*.py")):
        h.update(path.name.encode())
        h.update(path.read_bytes())
    return h.hexdigest()[:16]


@pytest.fixture(scope="session")
def artifact_dir(request, tmp_path_factory):
    if os.environ.get("LATENTFLOW_NO_CACHE"):
        return tmp_path_factory.mktemp("artifacts")
    path = Path(request.config.cache.mkdir("latentflow")) / _source_digest()
    path.mkdir(parents=True, exist_ok=True)
    return path


@pytest.fixture(scope="session")
def default_dataset(artifact_dir):
    """``default_dataset(eq)`` -> dataset generated with all default settings."""
    memo = {}

    def get(eq):
        if eq not in memo:
            path = artifact_dir / f"{eq}.lfds"
            if path.exists():
                memo[eq] = load_dataset(path)
            else:
                memo[eq] = generate_dataset(eq)
                save_dataset(memo[eq], path)
        return memo[eq]

    return get


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance(request):
    """``acceptance(n, ok, detail)`` records one criterion result for the summary."""
    results = request.config.stash.setdefault(ACCEPTANCE, {})

    def record(n, ok, detail):
        results[n] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(ACCEPTANCE, None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
