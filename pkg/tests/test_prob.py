import numpy as np
import pytest

from skacap.errors import ModelError
from skacap.prob import (
    Alphabet,
    Dmc,
    JointPMF,
    binary_entropy,
    bsc_matrix,
    compose,
    entropy,
    extend_with_channel,
    marginalize,
    mutual_information,
    product_pmf,
    statistical_distance,
    uniform_pmf,
)

B = Alphabet(2)


def pmf(ids_sizes, flat):
    return JointPMF(tuple(ids_sizes), np.asarray(flat, dtype=float))


def brute_marginal(flat, shape, keep_axes):
    """Direct-summation oracle: sum the table over all dropped coordinates."""
    arr = np.asarray(flat, dtype=float).reshape(shape)
    out = np.zeros([shape[a] for a in keep_axes])
    for idx in np.ndindex(*shape):
        out[tuple(idx[a] for a in keep_axes)] += arr[idx]
    return out.ravel()


def test_alphabet_invariants():
    with pytest.raises(ModelError):
        Alphabet(0)
    with pytest.raises(ModelError):
        Alphabet(2, ("a",))
    with pytest.raises(ModelError):
        Alphabet(2, ("a", "a"))
    assert Alphabet(3, ("x", "y", "z")).size == 3


def test_pmf_construction_invariants():
    with pytest.raises(ModelError):
        pmf([(0, B)], [0.5, 0.6])
    with pytest.raises(ModelError):
        pmf([(0, B)], [1.1, -0.1])
    with pytest.raises(ModelError):
        pmf([(0, B), (0, B)], [0.25] * 4)
    with pytest.raises(ModelError):
        pmf([(0, B)], [0.5, 0.5, 0.0])


def test_marginalize_uniform_pair():
    p = uniform_pmf([(0, B), (1, B)])
    m = marginalize(p, {0})
    assert m.ids == (0,)
    np.testing.assert_allclose(m.probs, [0.5, 0.5])


def test_marginalize_copy_variable():
    # X2 = X1 with X1 uniform
    p = pmf([(0, B), (1, B)], [0.5, 0.0, 0.0, 0.5])
    m = marginalize(p, {1})
    np.testing.assert_allclose(m.probs, [0.5, 0.5])


def test_marginalize_random_2x3_matches_brute_force():
    rng = np.random.default_rng(7)
    flat = rng.dirichlet(np.ones(6))
    p = pmf([(0, B), (1, Alphabet(3))], flat)
    m = marginalize(p, {1})
    np.testing.assert_allclose(m.probs, brute_marginal(flat, (2, 3), (1,)), atol=1e-14)
    # column sums of the 2x3 table
    np.testing.assert_allclose(m.probs, flat.reshape(2, 3).sum(axis=0), atol=1e-14)


def test_marginalize_errors():
    p = uniform_pmf([(0, B), (1, B)])
    with pytest.raises(ModelError):
        marginalize(p, set())
    with pytest.raises(ModelError):
        marginalize(p, {5})


def test_entropy_uniform_and_point_mass():
    assert entropy(uniform_pmf([(0, B)]), {0}) == pytest.approx(1.0, abs=1e-15)
    assert entropy(pmf([(0, B)], [1.0, 0.0]), {0}) == pytest.approx(0.0, abs=1e-15)


def test_conditional_entropy_bsc_noise():
    # X2 = X1 xor noise(0.11), X1 uniform: H(X2 | X1) = h(0.11)
    p = 0.11
    joint = np.array([[0.5 * (1 - p), 0.5 * p], [0.5 * p, 0.5 * (1 - p)]])
    jp = pmf([(0, B), (1, B)], joint.ravel())
    assert entropy(jp, {1}, {0}) == pytest.approx(binary_entropy(p), abs=1e-12)
    assert binary_entropy(0.11) == pytest.approx(0.4999, abs=5e-5)


def test_entropy_errors():
    p = uniform_pmf([(0, B), (1, B)])
    with pytest.raises(ModelError):
        entropy(p, {0}, {0})
    with pytest.raises(ModelError):
        entropy(p, {9})
    with pytest.raises(ModelError):
        entropy(p, set())


def test_mutual_information_basic():
    indep = uniform_pmf([(0, B), (1, B)])
    assert mutual_information(indep, {0}, {1}) == pytest.approx(0.0, abs=1e-12)
    copy = pmf([(0, B), (1, B)], [0.5, 0.0, 0.0, 0.5])
    assert mutual_information(copy, {0}, {1}) == pytest.approx(1.0, abs=1e-12)


def test_mutual_information_bsc_analytic():
    p = 0.2
    joint = np.array([[0.5 * (1 - p), 0.5 * p], [0.5 * p, 0.5 * (1 - p)]])
    jp = pmf([(0, B), (1, B)], joint.ravel())
    expect = 1.0 - binary_entropy(p)
    assert mutual_information(jp, {0}, {1}) == pytest.approx(expect, abs=1e-12)
    assert expect == pytest.approx(0.2781, abs=5e-5)


def test_mutual_information_overlap_error():
    p = uniform_pmf([(0, B), (1, B), (2, B)])
    with pytest.raises(ModelError):
        mutual_information(p, {0}, {0})
    with pytest.raises(ModelError):
        mutual_information(p, {0}, {1}, {1})


def test_statistical_distance_cases():
    p = pmf([(0, B)], [0.6, 0.4])
    q = pmf([(0, B)], [0.5, 0.5])
    assert statistical_distance(p, p) == 0.0
    assert statistical_distance(p, q) == pytest.approx(0.1, abs=1e-15)
    a = pmf([(0, B)], [1.0, 0.0])
    b = pmf([(0, B)], [0.0, 1.0])
    assert statistical_distance(a, b) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ModelError):
        statistical_distance(p, pmf([(1, B)], [0.5, 0.5]))


def test_statistical_distance_triangle_random():
    rng = np.random.default_rng(11)
    vl = [(0, B), (1, Alphabet(3))]
    for _ in range(50):
        p, q, r = (pmf(vl, rng.dirichlet(np.ones(6))) for _ in range(3))
        assert statistical_distance(p, q) <= (
            statistical_distance(p, r) + statistical_distance(r, q) + 1e-12
        )


def test_compose_identity_and_point_mass():
    ident = Dmc([(0, B)], [(1, B)], np.eye(2))
    out = compose(uniform_pmf([(0, B)]), ident)
    np.testing.assert_allclose(out.probs, [0.5, 0.0, 0.0, 0.5])
    w = Dmc([(0, B)], [(1, B)], bsc_matrix(0.3))
    point = pmf([(0, B)], [1.0, 0.0])
    out = compose(point, w)
    np.testing.assert_allclose(out.probs, [0.7, 0.3, 0.0, 0.0])


def test_compose_bsc_example():
    w = Dmc([(0, B)], [(1, B)], bsc_matrix(0.11))
    out = compose(uniform_pmf([(0, B)]), w)
    np.testing.assert_allclose(out.probs, [0.445, 0.055, 0.055, 0.445], atol=1e-15)


def test_compose_marginal_recovers_input_exactly():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = pmf([(0, Alphabet(3)), (1, B)], rng.dirichlet(np.ones(6)))
        rows = rng.dirichlet(np.ones(4), size=6)
        w = Dmc([(0, Alphabet(3)), (1, B)], [(2, B), (3, B)], rows)
        joint = compose(p, w)
        back = marginalize(joint, {0, 1})
        np.testing.assert_allclose(back.probs, p.probs, atol=1e-12)


def test_compose_variable_mismatch():
    w = Dmc([(0, B)], [(1, B)], bsc_matrix(0.1))
    with pytest.raises(ModelError):
        compose(uniform_pmf([(2, B)]), w)


def test_product_pmf():
    a = pmf([(0, B)], [0.3, 0.7])
    b = pmf([(1, B)], [0.5, 0.5])
    out = product_pmf([a, b])
    np.testing.assert_allclose(out.probs, np.outer([0.3, 0.7], [0.5, 0.5]).ravel())
    np.testing.assert_allclose(out.probs, [0.15, 0.15, 0.35, 0.35])
    assert product_pmf([a]) is a
    for f, orig in ((0, a), (1, b)):
        np.testing.assert_allclose(marginalize(out, {f}).probs, orig.probs, atol=1e-15)
    with pytest.raises(ModelError):
        product_pmf([a, pmf([(0, B)], [0.5, 0.5])])


def test_chain_rule_random():
    rng = np.random.default_rng(5)
    for _ in range(30):
        nvars = rng.integers(2, 5)
        sizes = rng.integers(2, 4, size=nvars)
        vl = [(i, Alphabet(int(s))) for i, s in enumerate(sizes)]
        p = pmf(vl, rng.dirichlet(np.ones(int(np.prod(sizes)))))
        ids = list(range(nvars))
        k = int(rng.integers(1, nvars))
        s, t = set(ids[:k]), set(ids[k:])
        lhs = entropy(p, s | t)
        rhs = entropy(p, s) + entropy(p, t, s)
        assert lhs == pytest.approx(rhs, abs=1e-10)
        # bounds
        log_alph = sum(np.log2(sizes[i]) for i in s)
        assert -1e-12 <= entropy(p, s, t) <= log_alph + 1e-10
        # symmetry of mutual information
        assert mutual_information(p, s, t) == pytest.approx(
            mutual_information(p, t, s), abs=1e-10
        )


def test_extend_with_channel_matches_compose():
    rng = np.random.default_rng(9)
    p = pmf([(0, B), (1, B)], rng.dirichlet(np.ones(4)))
    rows = rng.dirichlet(np.ones(2), size=4)
    w = Dmc([(0, B), (1, B)], [(2, B)], rows)
    np.testing.assert_allclose(
        extend_with_channel(p, w).probs, compose(p, w).probs, atol=1e-15
    )


def test_extend_with_channel_subset_inputs():
    # channel acts on variable 1 only; brute-force the joint
    rng = np.random.default_rng(13)
    flat = rng.dirichlet(np.ones(6))
    p = pmf([(0, Alphabet(3)), (1, B)], flat)
    rows = rng.dirichlet(np.ones(2), size=2)
    w = Dmc([(1, B)], [(2, B)], rows)
    got = extend_with_channel(p, w)
    assert got.ids == (0, 1, 2)
    expect = np.zeros((3, 2, 2))
    tab = flat.reshape(3, 2)
    for x in range(3):
        for y in range(2):
            for z in range(2):
                expect[x, y, z] = tab[x, y] * rows[y, z]
    np.testing.assert_allclose(got.probs, expect.ravel(), atol=1e-15)


def test_cell_guard():
    with pytest.raises(ModelError):
        uniform_pmf([(i, Alphabet(4)) for i in range(13)])  # 4^13 > 2^24


def test_dmc_row_error_reports_index_and_sum():
    rows = np.array([[0.5, 0.5], [0.49, 0.49]])
    with pytest.raises(ModelError, match=r"row 1 sums to 0\.98"):
        Dmc([(0, B)], [(1, B)], rows)
