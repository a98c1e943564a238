import numpy as np
import pytest

from skacap.errors import ModelError
from skacap.models import Polytree, edge
from skacap.optimize import InputOptimizerConfig
from skacap.polytree import (
    edge_capacity,
    mutual_information_matrix,
    polytree_capacity,
    wiretapped_edge_lower,
    wiretapped_polytree_bounds,
)
from skacap.prob import bec_matrix, binary_entropy, bsc_matrix

CFG = InputOptimizerConfig(restarts=3, ascent=20, seed=7)


def cascade(p, q):
    """Crossover of two BSCs in series: p*q = p(1-q) + q(1-p)."""
    return p * (1 - q) + q * (1 - p)


def test_bsc_capacities_match_binary_entropy_formula():
    for p in (0.05, 0.11, 0.2, 0.35, 0.5):
        res = edge_capacity(bsc_matrix(p), tol=1e-9)
        assert res.capacity == pytest.approx(1 - binary_entropy(p), abs=1e-8)
        assert res.gap <= 1e-9
        assert res.optimal_input.sum() == pytest.approx(1.0, abs=1e-12)


def test_identity_ternary_channel():
    res = edge_capacity(np.eye(3))
    assert res.capacity == pytest.approx(np.log2(3), abs=1e-8)


def test_bec_capacity():
    res = edge_capacity(bec_matrix(0.3))
    assert res.capacity == pytest.approx(0.7, abs=1e-8)


def test_zs_channel_against_grid_oracle():
    # asymmetric channel: optimum away from uniform; oracle = fine grid search
    rows = np.array([[1.0, 0.0], [0.3, 0.7]])
    res = edge_capacity(rows, tol=1e-11)
    grid = np.linspace(0.0, 1.0, 200001)
    best = max(
        mutual_information_matrix(np.array([t, 1 - t]), rows) for t in grid[1:-1]
    )
    assert res.capacity == pytest.approx(best, abs=1e-8)


def test_edge_capacity_rejects_bad_input():
    with pytest.raises(ModelError):
        edge_capacity(np.array([[0.5, 0.4], [0.5, 0.5]]))
    with pytest.raises(ModelError):
        edge_capacity(bsc_matrix(0.1), tol=0.0)


def test_ba_monotone_lower_bound_sequence():
    # the achieved mutual information never decreases across iterations
    rows = np.random.default_rng(5).dirichlet(np.ones(4), size=3)
    from skacap.polytree import _divergences

    r = np.full(3, 1 / 3)
    prev = -np.inf
    for _ in range(50):
        d = _divergences(rows, r @ rows)
        i_low = float(r @ d)
        assert i_low >= prev - 1e-12
        prev = i_low
        r = r * np.exp2(d)
        r /= r.sum()


def test_polytree_capacity_single_edge():
    g = Polytree(2, (edge(0, 1, bsc_matrix(0.11)),))
    rep = polytree_capacity(g)
    assert rep.value == pytest.approx(1 - binary_entropy(0.11), abs=1e-8)
    assert rep.kind == "exact"


def test_polytree_capacity_path_min_of_edges():
    g = Polytree(3, (edge(0, 1, bsc_matrix(0.11)), edge(1, 2, bsc_matrix(0.2))))
    rep = polytree_capacity(g)
    assert rep.value == pytest.approx(1 - binary_entropy(0.2), abs=1e-8)
    caps = [e["capacity"] for e in rep.witness["edges"]]
    assert min(caps) == rep.value


def test_polytree_capacity_zero_capacity_edge_dominates():
    dead = np.array([[1.0, 0.0], [1.0, 0.0]])  # constant output
    g = Polytree(3, (edge(0, 1, bsc_matrix(0.05)), edge(1, 2, dead)))
    assert polytree_capacity(g).value == pytest.approx(0.0, abs=1e-12)


def test_polytree_capacity_edge_order_invariant():
    e1 = edge(0, 1, bsc_matrix(0.11))
    e2 = edge(1, 2, bsc_matrix(0.2))
    v1 = polytree_capacity(Polytree(3, (e1, e2))).value
    v2 = polytree_capacity(Polytree(3, (e2, e1))).value
    assert v1 == v2  # bit-identical


def test_wiretap_constant_equals_edge_capacity():
    res = wiretapped_edge_lower(bsc_matrix(0.11), None, CFG)
    cap = edge_capacity(bsc_matrix(0.11)).capacity
    assert res.value == pytest.approx(cap, abs=1e-6)
    assert res.value <= cap + 1e-9


def test_wiretap_identity_kills_key():
    res = wiretapped_edge_lower(bsc_matrix(0.1), np.eye(2), CFG)
    assert res.value == pytest.approx(0.0, abs=1e-10)


def test_wiretap_markov_identity_at_uniform():
    # I(T;Y|Z) = I(T;Y) - I(T;Z) under T - Y - Z; Z is a BSC(0.3) of Y
    p, q = 0.1, 0.3
    w_y = bsc_matrix(p)
    w_z = bsc_matrix(q)
    uniform = np.array([0.5, 0.5])
    got = mutual_information_matrix(uniform, w_y) - mutual_information_matrix(
        uniform, w_y @ w_z
    )
    expect = binary_entropy(cascade(p, q)) - binary_entropy(p)
    assert got == pytest.approx(expect, abs=1e-12)
    # the optimizer should do at least as well as the uniform input
    res = wiretapped_edge_lower(w_y, w_z, CFG)
    assert res.value >= got - 1e-9


def test_wiretap_markov_identity_vs_joint_conditional_mi():
    # direct I(T;Y|Z) on the triple joint equals I(T;Y) - I(T;Z)
    from skacap.prob import Alphabet, Dmc, JointPMF, mutual_information

    rng = np.random.default_rng(3)
    for _ in range(10):
        w_y = rng.dirichlet(np.ones(2), size=2)
        w_z = rng.dirichlet(np.ones(2), size=2)
        p = rng.dirichlet(np.ones(2))
        joint = np.zeros((2, 2, 2))
        for t in range(2):
            for y in range(2):
                for z in range(2):
                    joint[t, y, z] = p[t] * w_y[t, y] * w_z[y, z]
        jp = JointPMF(((0, Alphabet(2)), (1, Alphabet(2)), (2, Alphabet(2))), joint.ravel())
        direct = mutual_information(jp, {0}, {1}, {2})
        viamarkov = mutual_information_matrix(p, w_y) - mutual_information_matrix(
            p, w_y @ w_z
        )
        assert direct == pytest.approx(viamarkov, abs=1e-10)


def test_wiretapped_bounds_single_edge_z_equals_y():
    g = Polytree(2, (edge(0, 1, bsc_matrix(0.1), wiretap_rows=np.eye(2)),))
    lower, upper = wiretapped_polytree_bounds(g, CFG)
    assert lower.value == pytest.approx(0.0, abs=1e-9)
    assert upper.value == pytest.approx(0.0, abs=1e-9)


def test_wiretapped_bounds_constant_wiretap_reduces_to_capacity():
    g = Polytree(
        3,
        (
            edge(0, 1, bsc_matrix(0.11), wiretap_rows=np.ones((2, 1))),
            edge(1, 2, bsc_matrix(0.2), wiretap_rows=np.ones((2, 1))),
        ),
    )
    lower, upper = wiretapped_polytree_bounds(g, CFG)
    cap = polytree_capacity(g).value
    assert lower.value == pytest.approx(cap, abs=1e-6)
    assert lower.value <= upper.value + 1e-7


def test_wiretapped_bounds_markov_single_edge_tight():
    g = Polytree(2, (edge(0, 1, bsc_matrix(0.1), wiretap_rows=bsc_matrix(0.3)),))
    lower, upper = wiretapped_polytree_bounds(g, CFG)
    # m=2 closed form: both sides equal max_p I(T;Y|Z)
    assert lower.value <= upper.value + 1e-7
    assert upper.value == pytest.approx(lower.value, abs=1e-5)
    assert lower.kind == "lower_bound" and upper.kind == "upper_bound"


def test_wiretap_lower_never_exceeds_capacity():
    # random channels can be nearly flat, where BA converges slowly: use a
    # looser certificate tolerance, which still dominates the comparison
    rng = np.random.default_rng(11)
    for _ in range(10):
        w_y = rng.dirichlet(np.ones(2), size=2)
        w_z = rng.dirichlet(np.ones(2), size=2)
        cap = edge_capacity(w_y, tol=1e-7).capacity
        res = wiretapped_edge_lower(w_y, w_z, InputOptimizerConfig(restarts=2, seed=1))
        assert res.value <= cap + 1e-7
