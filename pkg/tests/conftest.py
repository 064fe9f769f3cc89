import numpy as np
import pytest


def central_difference(f, x, h=1e-5):
    """Central finite-difference gradient of scalar ``f`` at array ``x``."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f(x)
        flat[i] = old - h
        fm = f(x)
        flat[i] = old
        gf[i] = (fp - fm) / (2 * h)
    return g


def rel_error(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def blobs():
    from advbench.data.images import make_blobs

    ds = make_blobs(150, classes=3, separation=0.6, noise=0.2, seed=0)
    return ds.train_test_split(0.3, seed=0)


@pytest.fixture(scope="session")
def blob_mlp(blobs):
    from advbench.models import MLPClassifier

    train, _ = blobs
    return MLPClassifier(hidden_layer_sizes=(32,), epochs=20, seed=0).fit(train.images, train.labels)


def affine_model(W, b):
    """Single affine layer with logits ``x @ W + b``."""
    from advbench.models.network import Affine, Network

    W = np.asarray(W, dtype=np.float64)
    layer = Affine(W.shape[0], W.shape[1])
    net = Network([layer], (W.shape[0],))
    net.set_weights([W, np.asarray(b, dtype=np.float64)])
    return net


def tiny_graph(n=6, p=0.4, d=4, classes=2, seed=0, train=None):
    """Random small graph with binary features; every node gets a label."""
    from advbench.data.graphs import GraphDataset
    from advbench.graph.sparse import SparseSym

    r = np.random.default_rng(seed)
    A = np.triu((r.random((n, n)) < p).astype(float), 1)
    A = A + A.T
    labels = np.arange(n) % classes
    X = (r.random((n, d)) < 0.5).astype(float)
    train = np.arange(classes) if train is None else np.asarray(train)
    rest = np.setdiff1d(np.arange(n), train)
    return GraphDataset(SparseSym.from_dense(A), X, labels, train, rest[:0], rest)


@pytest.fixture(scope="session")
def sbm():
    from advbench.data.graphs import make_sbm

    return make_sbm((20, 20), 0.3, 0.02, seed=0)


# PASS/FAIL lines emitted by the acceptance suite, repeated at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
