import numpy as np
import pytest
from conftest import central_difference, rel_error, tiny_graph
from hypothesis import given, settings
from hypothesis import strategies as st

from advbench.autodiff import Tensor
from advbench.data.graphs import make_sbm
from advbench.graph import GCN, LossSpec, SparseSym, input_gradients, normalize_adj, normalize_adj_tensor
from advbench.graph.gcn import attack_loss_value


def test_normalize_empty_graph_is_identity():
    assert np.allclose(normalize_adj(SparseSym(2)).toarray(), np.eye(2))


def test_normalize_single_edge():
    M = normalize_adj(SparseSym(2, [(0, 1)])).toarray()
    assert np.allclose(M, 0.5)


def test_normalize_triangle_rows_sum_to_one():
    M = normalize_adj(SparseSym(3, [(0, 1), (1, 2), (0, 2)])).toarray()
    assert np.allclose(M.sum(1), 1.0)


def test_row_sums_can_exceed_one():
    # star centre: 1/4 + 3/sqrt(8)
    M = normalize_adj(SparseSym(4, [(0, 1), (0, 2), (0, 3)])).toarray()
    assert M[0].sum() == pytest.approx(0.25 + 3 / np.sqrt(8))


def test_isolated_node_row():
    M = normalize_adj(SparseSym(3, [(0, 1)])).toarray()
    assert np.array_equal(M[2], [0, 0, 1])


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 9), st.integers(0, 10_000))
def test_normalized_adjacency_properties(n, seed):
    g = tiny_graph(n, seed=seed)
    M = normalize_adj(g.adj).toarray()
    assert np.allclose(M, M.T)
    assert np.all(M.sum(1) > 0)
    assert np.allclose(M, normalize_adj_tensor(Tensor(g.adj.to_dense())).data)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10_000))
def test_sparse_dense_round_trip(n, seed):
    r = np.random.default_rng(seed)
    A = np.triu((r.random((n, n)) < 0.5).astype(float), 1)
    A = A + A.T
    S = SparseSym.from_dense(A)
    assert np.array_equal(S.to_dense(), A)
    assert SparseSym.from_dense(S.to_dense()) == S
    assert np.array_equal(S.degree, A.sum(1))


def test_flip_recomputes_normalization():
    g = tiny_graph(7, seed=3)
    flipped = g.adj.flip([(0, 1), (2, 5)])
    A = g.adj.to_dense()
    for i, j in [(0, 1), (2, 5)]:
        A[i, j] = A[j, i] = 1 - A[i, j]
    assert np.allclose(normalize_adj(flipped).toarray(), normalize_adj(SparseSym.from_dense(A)).toarray())


def test_linear_gcn_equals_two_hop_product():
    g = tiny_graph(8, seed=1)
    m = GCN(with_relu=False, seed=0).initialize(4, 2)
    M = normalize_adj(g.adj).toarray()
    expected = M @ M @ g.features @ m.W0_.data @ m.W1_.data
    assert np.allclose(m.logits(g), expected, atol=1e-12)


def test_zero_weights_give_uniform_predictions(sbm):
    m = GCN(seed=0).initialize(sbm.features.shape[1], 2)
    m.set_weights([np.zeros_like(m.W0_.data), np.zeros_like(m.W1_.data)])
    assert np.allclose(m.predict_proba(sbm), 0.5)
    assert m.score(sbm) == pytest.approx(0.5, abs=0.1)


def test_sbm_accuracy(sbm):
    assert GCN(seed=0).fit(sbm).score(sbm) >= 0.85


def test_fit_is_deterministic(sbm):
    a, b = GCN(seed=2).fit(sbm), GCN(seed=2).fit(sbm)
    assert all(np.array_equal(x, y) for x, y in zip(a.get_weights(), b.get_weights()))
    assert a.report_.losses == b.report_.losses


def test_overlapping_splits_rejected(sbm):
    with pytest.raises(ValueError):
        GCN().fit(sbm, idx_train=sbm.idx_test[:3])


@pytest.mark.parametrize("relu", [True, False])
@pytest.mark.parametrize("kind", ["ce", "cw"])
def test_input_gradients_match_finite_differences(relu, kind):
    g = tiny_graph(6, p=0.5, seed=4)
    m = GCN(with_relu=relu, seed=1).initialize(4, 2)
    spec = LossSpec([2, 3], [0, 1], kind)
    _, grads = input_gradients(m, g, spec)
    A0 = g.adj.to_dense()

    def loss_sym(a):
        # perturb both symmetric entries through a symmetric parameter
        S = np.triu(a, 1)
        return attack_loss_value(m, g, spec, adj=A0 + S + S.T)

    fd = central_difference(loss_sym, np.zeros((6, 6)), h=1e-6)
    iu = np.triu_indices(6, 1)
    assert rel_error(2 * grads["adj"][iu], fd[iu]) <= 1e-4
    fdx = central_difference(lambda X: attack_loss_value(m, g, spec, features=X), g.features, h=1e-6)
    assert rel_error(grads["features"], fdx) <= 1e-4


def test_adjacency_gradient_symmetric_with_zero_diagonal():
    g = tiny_graph(7, seed=5)
    m = GCN(seed=0).initialize(4, 2)
    G = input_gradients(m, g, LossSpec([1], [1]))[1]["adj"]
    assert np.array_equal(G, G.T)
    assert np.all(np.diag(G) == 0)


def test_unreachable_features_have_zero_gradient():
    # node 5 is more than two hops from the target
    from advbench.data.graphs import GraphDataset

    A = SparseSym(6, [(0, 1), (1, 2), (3, 4), (4, 5)])
    X = np.random.default_rng(0).random((6, 3))
    g = GraphDataset(A, X, np.array([0, 1, 0, 1, 0, 1]), [0, 1], [], [2, 3, 4, 5])
    m = GCN(seed=0).initialize(3, 2)
    Gx = input_gradients(m, g, LossSpec([0], [0]))[1]["features"]
    assert np.all(Gx[3:] == 0)
    assert np.any(Gx[:3] != 0)


def test_sbm_generator_is_deterministic():
    a, b = make_sbm((10, 10), seed=7), make_sbm((10, 10), seed=7)
    assert a.adj == b.adj and np.array_equal(a.features, b.features)
