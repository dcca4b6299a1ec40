import numpy as np
import pytest

from pprlocal import (DcsbmParams, ParameterError, block_degrees, block_ppr,
                      block_transition, exact_ppr_dense, landing_probabilities,
                      ld_ppr_equivalence, make_four_parameter_sbm,
                      population_adjacency, population_ppr, ppr_series)
from pprlocal.blockmodel import balanced_membership

from test_blockmodel import CIRCULATION, HIERARCHY, INDEFINITE, SINGULAR


def random_instance(rng, K=None, N=None, directed=None):
    """Random DC-SBM with symmetric assortative connectivity.

    Directed instances get independent in/out degree parameters; the block
    connectivity stays symmetric so the block walk is reversible.
    """
    K = K if K is not None else int(rng.integers(2, 5))
    N = N if N is not None else int(rng.integers(4 * K, 51))
    directed = bool(rng.integers(0, 2)) if directed is None else directed
    base = rng.uniform(0.5, 2.0, (K, K))
    B = (base + base.T) / 2 + np.diag(rng.uniform(1.5, 3.5, K))
    z = balanced_membership(K, N)

    def draw_theta():
        raw = rng.uniform(0.5, 2.0, N)
        sums = np.zeros(K)
        np.add.at(sums, z, raw)
        return raw / sums[z]

    theta_in = draw_theta()
    theta_out = draw_theta() if directed else theta_in
    return DcsbmParams(K, B, z, theta_in, theta_out, directed=directed)


def population_transition(params):
    A = population_adjacency(params)
    return A / A.sum(axis=1, keepdims=True)


def test_factorization_matches_dense_oracle():
    rng = np.random.default_rng(20)
    for _ in range(10):
        params = random_instance(rng)
        N = params.n_nodes
        seed = int(rng.integers(0, N))
        pi = np.zeros(N)
        pi[seed] = 1.0
        alpha = float(rng.uniform(0.05, 0.9))
        p, appr = population_ppr(params, pi, alpha)
        oracle = exact_ppr_dense(population_transition(params), pi, alpha)
        assert np.abs(p - oracle).max() < 1e-10
        d_in = population_adjacency(params).sum(axis=0)
        assert np.abs(appr - oracle / d_in).max() < 1e-10


def test_factorization_multi_seed():
    rng = np.random.default_rng(21)
    params = random_instance(rng, K=3, N=30, directed=True)
    pi = np.zeros(30)
    pi[[1, 12, 25]] = 1 / 3
    p, _ = population_ppr(params, pi, 0.15)
    oracle = exact_ppr_dense(population_transition(params), pi, 0.15)
    assert np.abs(p - oracle).max() < 1e-10


def test_single_block_structure():
    rng = np.random.default_rng(22)
    raw = rng.uniform(0.5, 2.0, 20)
    theta = raw / raw.sum()
    params = DcsbmParams(1, np.array([[3.0]]), np.zeros(20, int), theta, theta, False)
    alpha = 0.15
    pi = np.zeros(20)
    pi[4] = 1.0
    p, appr = population_ppr(params, pi, alpha)
    off_seed = np.arange(20) != 4
    # walk mass is proportional to the degree parameter away from the seed
    assert p[off_seed] == pytest.approx((1 - alpha) * theta[off_seed], abs=1e-12)
    assert appr[off_seed] == pytest.approx(np.full(19, appr[1]), abs=1e-12)
    assert appr[4] > appr[1]
    oracle = exact_ppr_dense(population_transition(params), pi, alpha)
    assert np.abs(p - oracle).max() < 1e-12


def test_adjusted_vector_block_structure():
    rng = np.random.default_rng(23)
    params = random_instance(rng, K=3, N=36, directed=False)
    pi = np.zeros(36)
    pi[0] = 1.0
    _, appr = population_ppr(params, pi, 0.15)
    for k in range(1, 3):
        members = np.flatnonzero(params.z == k)
        assert np.ptp(appr[members]) < 1e-14
    peers = np.flatnonzero(params.z == 0)[1:]
    assert np.ptp(appr[peers]) < 1e-14
    assert appr[0] > appr[peers[0]]


def test_population_seed_strictly_top():
    rng = np.random.default_rng(24)
    for directed in (False, True):
        params = random_instance(rng, K=3, N=33, directed=directed)
        for alpha in (0.05, 0.15, 0.5):
            seed = int(rng.integers(0, 33))
            pi = np.zeros(33)
            pi[seed] = 1.0
            _, appr = population_ppr(params, pi, alpha)
            rest = np.delete(appr, seed)
            assert appr[seed] > rest.max()


def test_alpha_zero_limit_constant_adjusted_vector():
    rng = np.random.default_rng(25)
    params = random_instance(rng, K=3, N=30, directed=True)
    pi = np.zeros(30)
    pi[2] = 1.0
    _, appr = population_ppr(params, pi, 0.0)
    assert np.ptp(appr) < 1e-10


def test_population_adjacency_uniform_single_block():
    N = 8
    theta = np.full(N, 1 / N)
    params = DcsbmParams(1, np.array([[1.0]]), np.zeros(N, int), theta, theta, False)
    assert population_adjacency(params) == pytest.approx(np.full((N, N), 1 / N ** 2))


def test_population_degree_identity():
    rng = np.random.default_rng(26)
    params = random_instance(rng, K=3, N=24, directed=True)
    A = population_adjacency(params)
    d_in_block, d_out_block = block_degrees(params.B)
    assert A.sum(axis=0) == pytest.approx(params.theta_in * d_in_block[params.z])
    assert A.sum(axis=1) == pytest.approx(params.theta_out * d_out_block[params.z])


def test_population_transition_power_factorizes():
    rng = np.random.default_rng(27)
    params = random_instance(rng, K=3, N=20, directed=True)
    P = population_transition(params)
    Pb = block_transition(params.B)
    Z = np.zeros((20, params.K))
    Z[np.arange(20), params.z] = 1.0
    lifted = Z @ np.linalg.matrix_power(Pb, 2) @ Z.T @ np.diag(params.theta_in)
    assert np.abs(P @ P - lifted).max() < 1e-12


def test_population_transition_spectrum_matches_blocks():
    rng = np.random.default_rng(28)
    params = make_four_parameter_sbm(3, 30, 0.6, 0.2, 5.0)
    P = population_transition(params)
    eigs = np.sort(np.abs(np.linalg.eigvals(P)))[::-1]
    assert np.all(eigs[:3] > 1e-8)
    assert np.all(eigs[3:] < 1e-8)
    block_eigs = np.sort(np.abs(np.linalg.eigvals(block_transition(params.B))))[::-1]
    assert eigs[:3] == pytest.approx(block_eigs, abs=1e-9)
    del rng


@pytest.mark.parametrize("B,alphas,expect_first", [
    (SINGULAR, (0.05, 0.15, 0.5), True),
    (INDEFINITE, (0.05, 0.15, 0.5), True),
    (CIRCULATION, (0.15, 0.5), True),
    (HIERARCHY, (0.15,), False),
])
def test_seed_block_ranking_per_family(B, alphas, expect_first):
    for alpha in alphas:
        bp = block_ppr(B, 0, alpha)
        assert (int(np.argmax(bp.p_block_adjusted)) == 0) is expect_first


def test_four_parameter_families_seed_block_top():
    for K, b1, b2 in ((2, 0.6, 0.2), (3, 0.6, 0.2), (4, 0.9, 0.3)):
        params = make_four_parameter_sbm(K, 10 * K, b1, b2, 4.0)
        for alpha in (0.05, 0.15, 0.5):
            bp = block_ppr(params.B, 0, alpha)
            assert int(np.argmax(bp.p_block_adjusted)) == 0


def test_block_alpha_zero_adjusted_constant():
    bp = block_ppr(INDEFINITE, 0, 0.0)
    assert np.ptp(bp.p_block_adjusted) < 1e-10


def test_separation_measure_increases_with_alpha():
    params = make_four_parameter_sbm(3, 90, 0.6, 0.2, 10.0)
    grid = np.linspace(0.01, 0.99, 25)
    deltas = [block_ppr(params.B, 0, float(a)).delta_alpha for a in grid]
    assert all(b >= a - 1e-12 for a, b in zip(deltas, deltas[1:]))
    assert all(0 < d <= 1 for d in deltas)


def test_landing_probability_rows():
    P = block_transition(make_four_parameter_sbm(3, 9, 0.6, 0.2, 2.0).B)
    rows = landing_probabilities(P, {0: 1.0}, 3)
    assert rows[0] == pytest.approx([1.0, 0.0, 0.0])
    assert rows[1] == pytest.approx([0.6, 0.2, 0.2])
    assert rows.sum(axis=1) == pytest.approx(np.ones(3))
    with pytest.raises(ParameterError):
        landing_probabilities(P, {0: 1.0}, 0)


def test_landing_weighted_sum_reproduces_series():
    rng = np.random.default_rng(29)
    params = random_instance(rng, K=3, N=18, directed=False)
    P = population_transition(params)
    pi = np.zeros(18)
    pi[3] = 1.0
    steps, alpha = 12, 0.3
    rows = landing_probabilities(P, pi, steps)
    weights = alpha * (1 - alpha) ** np.arange(steps)
    assert weights @ rows == pytest.approx(ppr_series(P, pi, alpha, steps - 1), abs=1e-12)


def test_ld_equivalence_at_matched_teleportation():
    report = ld_ppr_equivalence(0.6, 0.2, K=2)
    assert report.lambda2 == pytest.approx((0.6 - 0.2) / (0.6 + 0.2), abs=1e-12)
    assert report.alpha == pytest.approx(1 - report.lambda2)
    assert report.cosine >= 1 - 1e-10
    assert report.rankings_agree


def test_ld_equivalence_override_breaks_alignment():
    report = ld_ppr_equivalence(0.6, 0.2, K=2, alpha_override=0.15)
    assert report.cosine < 1 - 1e-6
    with pytest.raises(ParameterError):
        ld_ppr_equivalence(0.6, 0.2, K=1)


def test_ld_equivalence_larger_k():
    report = ld_ppr_equivalence(0.9, 0.3, K=3)
    assert report.cosine >= 1 - 1e-10
    assert report.rankings_agree
    assert 0 < report.lambda2 < 1
