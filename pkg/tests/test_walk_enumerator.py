import json
import math
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

from sparseblock.block_sampler import BlockMeasure, MeasureFamily
from sparseblock.graph_model import GraphSpec, sample_er_edges
from sparseblock.theory_kernel import ema_moments
from sparseblock.walk_enumerator import (
    MomentPolynomial,
    WordClass,
    classify_word,
    enumerate_tree_walks,
    evaluate_moment_polynomial,
    finite_rank_limit,
)
from sparseblock.words import Word

DATA = Path(__file__).parent / "data"


def catalan(n):
    return math.comb(2 * n, n) // (n + 1)


def test_p1():
    mp = enumerate_tree_walks(1)
    assert mp.terms == {(1, Word(((1, 2),))): 1}


def test_p2():
    mp = enumerate_tree_walks(2)
    assert mp.terms == {(1, Word.parse("1^4")): 1, (2, Word.parse("1^2 2^2")): 2}
    assert mp.scalar_value(3) == 21


def test_mu8_golden():
    golden = json.loads((DATA / "mu8_golden.json").read_text())
    assert enumerate_tree_walks(4).to_dict() == golden


def test_json_round_trip():
    mp = enumerate_tree_walks(3)
    back = MomentPolynomial.from_dict(json.loads(mp.to_json()))
    assert back.terms == mp.terms


@pytest.mark.parametrize("p", [1, 2, 3, 4, 5])
def test_structure(p):
    mp = enumerate_tree_walks(p)
    for (z, w), m in mp.terms.items():
        assert z == w.s
        assert all(r % 2 == 0 for r in w.powers.values())
        assert w.length == 2 * p and m > 0
    assert mp.z_totals()[p] == catalan(p)


@pytest.mark.parametrize("p", [1, 2, 3, 4, 5])
def test_limit_matches_series(p):
    assert finite_rank_limit(enumerate_tree_walks(p)) == ema_moments(p)[p]


def test_limits_by_hand():
    assert finite_rank_limit(enumerate_tree_walks(1)) == (0, 1)
    assert finite_rank_limit(enumerate_tree_walks(2)) == (0, 1, 2)
    assert finite_rank_limit(enumerate_tree_walks(4)) == (0, 1, 12, 28, 14)


def test_classify():
    assert classify_word(Word.parse("1^2 2^2")) is WordClass.NON_CROSSING
    assert classify_word(Word.parse("1^2 2^2 1^2 2^2")) is WordClass.CROSSING
    assert classify_word(Word.parse("1^3 2^1 3^2 2^1 1^1")) is WordClass.NON_CROSSING


def test_half_order_bounds():
    with pytest.raises(ValueError):
        enumerate_tree_walks(0)
    with pytest.raises(ValueError):
        enumerate_tree_walks(7)


def test_evaluate_p1_exact():
    m = BlockMeasure(5)
    est, err = evaluate_moment_polynomial(enumerate_tree_walks(1), m, 3.0, 100, seed=0)
    assert est == pytest.approx(3.0 / 5.0, abs=1e-12)
    assert err == pytest.approx(0.0, abs=1e-12)


def test_evaluate_scalar():
    # d = 1 rank-one sphere blocks are exactly 1
    m = BlockMeasure(1, MeasureFamily.RANK_ONE_SPHERE)
    est, err = evaluate_moment_polynomial(enumerate_tree_walks(2), m, 3.0, 10, seed=0)
    assert est == pytest.approx(21.0)
    assert err == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("d", [8, 16])
def test_evaluate_mu8_finite_d(d):
    # for sphere vectors every non-crossing word averages to t^s exactly;
    # the crossing word adds 2 Z^2/d * 3/(d(d+2))
    t = 1.0
    exact = 14 + 28 + 12 + 1 + 6 * t**2 / (d + 2)
    est, err = evaluate_moment_polynomial(enumerate_tree_walks(4), BlockMeasure(d), t * d, 40_000, seed=d)
    assert abs(est - exact) < 3 * err


def _scalar_trace_moments(N, Z, p_max, seed):
    e = sample_er_edges(GraphSpec(N, Z), seed)
    i, j = e.edges.T
    a = sp.coo_matrix((np.ones(len(i)), (i, j)), shape=(N, N)).tocsr()
    a = a + a.T
    out = []
    power = sp.identity(N, format="csr")
    for _ in range(p_max):
        power = power @ a
        out.append(power.multiply(power).sum() / N)  # tr A^{2p} = |A^p|_F^2
    return out


@pytest.mark.slow
def test_scalar_oracle_against_graphs():
    N, Z, R = 2000, 3.0, 50
    ss = np.random.SeedSequence(11)
    table = np.array([_scalar_trace_moments(N, Z, 5, np.random.default_rng(c)) for c in ss.spawn(R)])
    mean, se = table.mean(0), table.std(0, ddof=1) / math.sqrt(R)
    for p in range(1, 6):
        expected = enumerate_tree_walks(p).scalar_value(Z)
        assert abs(mean[p - 1] - expected) < 4 * se[p - 1], (p, mean[p - 1], expected, se[p - 1])
