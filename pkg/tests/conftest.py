from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
ASSET = ROOT / "src" / "ssmzip" / "assets" / "tokenizer.json.gz"
BENCHMARK = ROOT / "corpus" / "benchmark.txt"

# one line per acceptance criterion, echoed after the run so they survive
# pytest's output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def definition():
    from ssmzip import load_definition

    if not ASSET.exists():
        pytest.skip("tokenizer asset not built (scripts/build_tokenizer.py)")
    return load_definition(ASSET)


@pytest.fixture(scope="session")
def bench_data():
    if not BENCHMARK.exists():
        pytest.skip("benchmark corpus not built (scripts/build_corpus.py)")
    return BENCHMARK.read_bytes()[: 1 << 20]


@pytest.fixture(scope="session")
def bench_full(definition, bench_data):
    """Shared full-pipeline run on the 1 MB benchmark: (archive, trace)."""
    from ssmzip.pipeline import compress

    trace = []
    archive = compress(bench_data, definition, trace_every=1000, trace=trace)
    return archive, trace


@pytest.fixture(scope="session")
def bench3_data():
    if not BENCHMARK.exists():
        pytest.skip("benchmark corpus not built (scripts/build_corpus.py)")
    return BENCHMARK.read_bytes()


@pytest.fixture(scope="session")
def bench3_full(definition, bench3_data):
    """Shared full-pipeline archive of the whole 3 MB benchmark."""
    from ssmzip.pipeline import compress

    return compress(bench3_data, definition)
