import numpy as np
import pytest

from qekbench import datasets


@pytest.fixture(scope="session")
def wine_path(tmp_path_factory):
    """Native-format wine.data written from sklearn's bundled copy.

    Keeps the loader honest (it parses the label-first CSV layout) while
    staying runnable without network access.
    """
    from sklearn.datasets import load_wine

    bundle = load_wine()
    path = tmp_path_factory.mktemp("data") / "wine.data"
    lines = []
    for row, target in zip(bundle.data, bundle.target):
        lines.append(",".join([str(target + 1)] + [repr(float(v)) for v in row]))
    path.write_text("\n".join(lines) + "\n", "utf-8")
    return path


@pytest.fixture(scope="session")
def wine_dataset(wine_path):
    return datasets.load("wine", wine_path)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
