import time
from pathlib import Path

import pytest

from moscope.cli import main

ACCEPTANCE_RESULTS = []

FRAME_CONFIG = """\
[model]
architecture = frame
alpha = 1.0
seed = 0
"""

# two grid points that differ only in whether the optimizer can move the weights
GRID_CONFIG = """\
[model]
input_batchnorm = false
l2 = 0.0001
dropout_rate = 0.2
batch_size = 1
seed = 0

[grid]
filters = 16
learning_rate = none, 0.0
"""


def record(number, title, passed, detail=""):
    line = f"acceptance {number} [{'PASS' if passed else 'FAIL'}] {title}"
    if detail:
        line += f": {detail}"
    ACCEPTANCE_RESULTS.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(line)


def run(*argv):
    code = main([str(a) for a in argv])
    assert code == 0, f"moscope {' '.join(map(str, argv))} exited {code}"


def run_pipeline(root: Path, workers=1) -> dict:
    """gen-synth -> extract -> train/grid -> predict -> evaluate -> rank, via the CLI."""
    root.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    corpus = root / "corpus"
    manifest = corpus / "manifest.csv"
    run("gen-synth", "--out", corpus, "--speakers", 10, "--systems", 5, "--utts", 20,
        "--seed", 7)
    run("extract", "--manifest", manifest, "--out", root / "spec", "--kind", "spectrogram")
    (root / "frame.ini").write_text(FRAME_CONFIG)
    run("train", "--config", root / "frame.ini", "--features", root / "spec",
        "--manifest", manifest, "--out-model", root / "frame.mosr",
        "--history", root / "history.csv")
    run("predict", "--model", root / "frame.mosr", "--features", root / "spec",
        "--manifest", manifest, "--out-preds", root / "preds.csv")
    for level in ("utterance", "speaker", "system"):
        run("evaluate", "--preds", root / "preds.csv", "--manifest", manifest,
            "--level", level, "--split", "test", "--out", root / f"eval_{level}.csv",
            *(("--out-groups", root / f"groups_{level}.csv") if level != "utterance" else ()))
    for level in ("speaker", "system"):
        run("rank", "--preds", root / "preds.csv", "--manifest", manifest, "--level", level,
            "--split", "test", "--out-csv", root / f"rank_{level}.csv",
            "--out-svg", root / f"scatter_{level}.svg", "--out-cells", root / "cells.csv")
    frame_seconds = time.perf_counter() - t0

    run("extract", "--manifest", manifest, "--out", root / "emb", "--kind", "embedding",
        "--source", "mean-spectrum")
    (root / "grid.ini").write_text(GRID_CONFIG)
    run("grid", "--grid", root / "grid.ini", "--features", root / "emb", "--manifest", manifest,
        "--out-model", root / "lowcap.mosr", "--leaderboard", root / "leaderboard.csv",
        "--workers", workers)
    run("predict", "--model", root / "lowcap.mosr", "--features", root / "emb",
        "--manifest", manifest, "--out-preds", root / "lowcap_preds.csv")
    return {"root": root, "manifest": manifest, "frame_seconds": frame_seconds}


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    return run_pipeline(tmp_path_factory.mktemp("pipeline"))
