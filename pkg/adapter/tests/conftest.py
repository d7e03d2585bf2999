import subprocess
import sys

import pytest

SINGLES = ("bce", "mse", "l1")
REGULARIZERS = ("gaussian", "distance", "constant")


def _run_golden(out_path, seed, size, config_path=None):
    cmd = [
        sys.executable,
        "-m",
        "scloss.cli",
        "golden",
        "--seed",
        str(seed),
        "--size",
        size,
        "--out",
        str(out_path),
    ]
    if config_path is not None:
        cmd += ["--config", str(config_path)]
    subprocess.run(cmd, check=True, capture_output=True)


@pytest.fixture(scope="session")
def golden_dir(tmp_path_factory):
    """All nine term-combination vectors plus a defaults vector,
    produced through the core package's command-line interface."""
    root = tmp_path_factory.mktemp("golden")
    _run_golden(root / "defaults.json", seed=42, size="8x8")
    for single in SINGLES:
        for reg in REGULARIZERS:
            cfg = root / f"{single}_{reg}.toml"
            cfg.write_text(f'single_response = "{single}"\nregularizer = "{reg}"\n')
            _run_golden(
                root / f"{single}_{reg}.json", seed=42, size="8x8", config_path=cfg
            )
    return root


@pytest.fixture(scope="session")
def combination_vectors(golden_dir):
    return [
        golden_dir / f"{single}_{reg}.json"
        for single in SINGLES
        for reg in REGULARIZERS
    ]
