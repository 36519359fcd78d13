import numpy as np
import pytest

from icgt.errors import UnconnectableGraph
from icgt.graphs import (MixingMatrix, Topology, build_topology, metropolis_weights,
                         spectrum)


def suite_matrices():
    out = []
    for kind in ("ring", "star", "complete", "erdos_renyi"):
        for n in (3, 5, 10):
            top = build_topology(kind, n, er_prob=0.5, seed=42)
            out.append(metropolis_weights(top))
    return out


def test_ring_edges():
    top = build_topology("ring", 4)
    assert set(top.edges) == {(0, 1), (1, 2), (2, 3), (0, 3)}
    assert len(top.edges) == 4


def test_star_edges():
    top = build_topology("star", 3)
    assert set(top.edges) == {(0, 1), (0, 2)}


def test_complete_edge_count():
    assert len(build_topology("complete", 5).edges) == 10


def test_small_n_rejected():
    with pytest.raises(ValueError):
        build_topology("ring", 1)


def test_er_determinism_and_connectivity():
    a = build_topology("erdos_renyi", 8, er_prob=0.4, seed=3)
    b = build_topology("erdos_renyi", 8, er_prob=0.4, seed=3)
    assert a.edges == b.edges
    deg = a.degrees()
    assert deg.min() >= 1


def test_er_prob_one_is_complete():
    top = build_topology("erdos_renyi", 6, er_prob=1.0, seed=0)
    assert len(top.edges) == 15


def test_er_bad_prob():
    with pytest.raises(ValueError):
        build_topology("erdos_renyi", 5, er_prob=0.0)


def test_er_unconnectable():
    # vanishing edge probability cannot connect 30 nodes in 100 tries
    with pytest.raises(UnconnectableGraph):
        build_topology("erdos_renyi", 30, er_prob=1e-6, seed=0)


def test_metropolis_ring3_uniform():
    # ring on 3 nodes is K3: every degree 2, w_ij = 1/3 everywhere
    W = metropolis_weights(build_topology("ring", 3)).W
    assert np.allclose(W, np.full((3, 3), 1.0 / 3.0), atol=1e-15)


def test_metropolis_star3_values():
    W = metropolis_weights(build_topology("star", 3)).W
    expected = np.array([[1 / 3, 1 / 3, 1 / 3], [1 / 3, 2 / 3, 0.0], [1 / 3, 0.0, 2 / 3]])
    assert np.allclose(W, expected, atol=1e-15)


def test_metropolis_single_edge():
    W = metropolis_weights(build_topology("ring", 2)).W
    assert np.allclose(W, np.full((2, 2), 0.5), atol=1e-15)


def test_metropolis_requires_connected():
    top = Topology(kind="ring", n=4, edges=((0, 1), (2, 3)))
    with pytest.raises(ValueError, match="connected"):
        metropolis_weights(top)


def test_spectrum_rank_one():
    res = spectrum(np.full((3, 3), 1.0 / 3.0))
    assert np.allclose(res.eigenvalues, [1.0, 0.0, 0.0], atol=1e-12)
    assert abs(res.lambda2) < 1e-12
    assert abs(res.spectral_gap - 1.0) < 1e-12


def test_spectrum_star3():
    W = metropolis_weights(build_topology("star", 3)).W
    res = spectrum(W)
    assert np.allclose(res.eigenvalues, [1.0, 2.0 / 3.0, 0.0], atol=1e-12)
    assert abs(res.lambda2 - 2.0 / 3.0) < 1e-12
    assert abs(res.spectral_gap - 1.0 / 3.0) < 1e-12


def test_spectrum_identity_flagged_not_raised():
    res = spectrum(np.eye(2))
    assert res.lambda2 == pytest.approx(1.0)
    assert res.spectral_gap == pytest.approx(0.0)
    assert not res.assumption_ok


def test_spectrum_rejects_asymmetric():
    with pytest.raises(ValueError):
        spectrum(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_from_weights_validation():
    with pytest.raises(ValueError, match="symmetric"):
        MixingMatrix.from_weights(np.array([[0.5, 0.5], [0.4, 0.6]]))
    with pytest.raises(ValueError, match="sum"):
        MixingMatrix.from_weights(np.array([[0.5, 0.4], [0.4, 0.5]]))
    with pytest.raises(ValueError, match="nonnegative"):
        MixingMatrix.from_weights(np.array([[1.5, -0.5], [-0.5, 1.5]]))


def test_suite_invariants():
    for mix in suite_matrices():
        W = mix.W
        assert np.abs(W - W.T).max() == 0.0  # exact symmetry by construction
        assert np.abs(W.sum(axis=1) - 1.0).max() <= 1e-12
        assert np.abs(W.sum(axis=0) - 1.0).max() <= 1e-12
        assert W.min() >= 0.0 and W.max() <= 1.0
        assert mix.lambda2 < 1.0
        assert mix.lambda_n > -1.0
        assert mix.assumption_ok


def test_contraction_property():
    # averaging shrinks the off-consensus part by at least the spectral gap
    rng = np.random.default_rng(7)
    for mix in suite_matrices()[:6]:
        W, delta = mix.W, mix.spectral_gap
        x = rng.standard_normal((mix.n, 3, 100))  # 100 random blocks at once
        xbar = x.mean(axis=0, keepdims=True)
        mixed = np.einsum("ij,jdk->idk", W, x)
        lhs = np.sqrt(np.einsum("ndk,ndk->k", mixed - xbar, mixed - xbar))
        scale = np.sqrt(np.einsum("ndk,ndk->k", x - xbar, x - xbar))
        # absolute floor covers delta = 1 (complete graph), where exact
        # arithmetic gives 0 and float rounding leaves ~1e-16
        assert np.all(lhs <= (1 - delta) * scale * (1 + 1e-10) + 1e-12 * scale)
