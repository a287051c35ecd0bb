import sys
from pathlib import Path

import pytest

from basisguard.formats import write_idx_images, write_idx_labels
from basisguard.harness.data import load_split
from basisguard.model import Classifier, TrainConfig, train

ROOT = Path(__file__).resolve().parents[1]
MNIST = ROOT / "data" / "mnist5k"

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def mnist():
    train_set = load_split(MNIST, "train")
    test_set = load_split(MNIST, "t10k")
    return train_set, test_set


@pytest.fixture(scope="session")
def trained(mnist):
    """Model A (seed 0) and model B (seed 1) with the default training config."""
    (xtr, ytr), (xte, yte) = mnist
    out = {}
    for key, seed in (("a", 0), ("b", 1)):
        model = Classifier.initialized(xtr.shape[1:], 10, seed=seed)
        out[key] = train(model, xtr, ytr, TrainConfig(seed=seed), test=(xte, yte))
    return out


TINY_CONFIG = """
seed = 0
threads = 1
out = "out"
defenses = ["none", "lowpass", "jpeg"]

[dataset]
path = "data"
n_eval = 12

[models]
a = "ckpt/a.bgck"
b = "ckpt/b.bgck"

[train]
epochs = 1
batch = 16
seeds = { a = 0, b = 1 }

[experiment]
settings = ["gray", "black", "white-fga", "white-bpda"]

[[attacks]]
method = "fgsm"
epsilon = [0.02, 0.09]

[[attacks]]
method = "cw"
cw_steps = 3
magnitude_scale = [1.0, 2.0]
"""


@pytest.fixture(scope="session")
def tiny_project(tmp_path_factory, mnist):
    """A small on-disk project: IDX data, config and two quickly trained checkpoints."""
    from basisguard.harness.cli import main

    (xtr, ytr), (xte, yte) = mnist
    root = tmp_path_factory.mktemp("project")
    data = root / "data"
    data.mkdir()
    write_idx_images(data / "train-images-idx3-ubyte.gz", xtr[:64])
    write_idx_labels(data / "train-labels-idx1-ubyte.gz", ytr[:64])
    write_idx_images(data / "t10k-images-idx3-ubyte.gz", xte[:24])
    write_idx_labels(data / "t10k-labels-idx1-ubyte.gz", yte[:24])
    cfg = root / "tiny.toml"
    cfg.write_text(TINY_CONFIG)
    assert main(["train", "--config", str(cfg)]) == 0
    return root, cfg



def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
