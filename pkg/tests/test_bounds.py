from __future__ import annotations

import json
import math

import numpy as np
import pytest

from polymat import bounds, corpus, linalg
from polymat.errors import InputError
from polymat.polymatrix import PolyMatrix, gaussian, pbiased, rademacher
from polymat.sampling import SampleConfig, estimate_moment


def test_triples_and_pairs():
    assert len(bounds.all_triples(2)) == 6
    assert bounds.all_triples(1) == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]
    assert len(bounds.all_triples(3)) == 10
    assert bounds.all_pairs(1) == [(0, 1), (1, 0)]
    assert len(bounds.all_pairs(2)) == 5


def test_quadratic_example_constants():
    rep = bounds.quadratic_bound(corpus.example_quadratic(), rademacher(), 2)
    assert len(rep.terms) == 6
    for tm in rep.terms:
        assert tm.log_constant == pytest.approx(math.log(2 * 64**2), rel=1e-12)
    assert rep.normalization == "moment_root"
    assert rep.log_moment_power == pytest.approx(8 * rep.log_total, rel=1e-12)


def test_quadratic_schatten_terms_are_roots():
    F = corpus.example_quadratic()
    rep = bounds.quadratic_bound(F, rademacher(), 2)
    # F_{1,1,0} is the 6x6 matrix of C_{ij}/2 off the diagonal blocks
    D = np.zeros((6, 6))
    for (i, j) in [(1, 2), (1, 3), (2, 3)]:
        C = F.coefficient((i, j)) / 2
        D[2 * i - 2 : 2 * i, 2 * j - 2 : 2 * j] = C
        D[2 * j - 2 : 2 * j, 2 * i - 2 : 2 * i] = C
    assert rep.term("(1,1,0)").schatten == pytest.approx(linalg.schatten_norm(D, 8), rel=1e-9)


def test_zero_polynomial_bounds_vanish():
    Z = PolyMatrix(3, (2, 2), {})
    for rep in (bounds.quadratic_bound(Z, rademacher(), 2), bounds.homogeneous_multilinear_bound(Z, rademacher(), 2, degree=2)):
        assert rep.log_total == -math.inf and rep.total == 0.0
        assert rep.to_dict()["total"] == 0.0
    const = PolyMatrix(3, (2, 2), {(): np.eye(2)})
    assert bounds.multilinear_bound(const, rademacher(), 2).log_total == -math.inf


def test_homogeneous_constant_and_L_power():
    F = corpus.random_multilinear(3, 4, 2, dims=(2, 2))
    dist = pbiased(0.2)
    rep = bounds.homogeneous_multilinear_bound(F, dist, 2)
    assert len(rep.terms) == 6
    for tm in rep.terms:
        c = int(tm.label.strip("()").split(",")[2])
        want = 8 * 2 * math.log(48 * 2 * 2) + 8 * c * math.log(dist.L)
        assert tm.log_constant == pytest.approx(want, rel=1e-12)


def test_multilinear_on_homogeneous_adds_degree_power():
    F = corpus.random_multilinear(5, 4, 3, dims=(2, 2))
    h = bounds.homogeneous_multilinear_bound(F, rademacher(), 2)
    m = bounds.multilinear_bound(F, rademacher(), 2)
    assert m.log_total == pytest.approx(h.log_total + 8 * math.log(3), rel=1e-12)
    assert len(m.subreports) == 1


def test_bounded_recursions_reject_gaussian():
    with pytest.raises(InputError):
        bounds.quadratic_bound(corpus.example_quadratic(), gaussian(), 2)
    with pytest.raises(InputError):
        bounds.homogeneous_multilinear_bound(corpus.example_quadratic(), gaussian(), 2)
    with pytest.raises(InputError):
        bounds.multilinear_bound(corpus.example_quadratic(), rademacher(), 1)


def test_gaussian_linear_terms():
    rng = np.random.default_rng(9)
    Cs = [rng.standard_normal((2, 2)) for _ in range(3)]
    P = PolyMatrix(3, (2, 2), {(i + 1,): C for i, C in enumerate(Cs)}, multilinear=False)
    rep = bounds.gaussian_bound(P, 2)
    assert [tm.label for tm in rep.terms] == ["(0,1)", "(1,0)"]
    for tm in rep.terms:
        assert tm.log_constant == pytest.approx(4 * math.log(2 * math.sqrt(2) * 2), rel=1e-12)
    assert rep.term("(1,0)").schatten == pytest.approx(linalg.schatten_power(np.vstack(Cs), 4), rel=1e-9)
    assert rep.term("(0,1)").schatten == pytest.approx(linalg.schatten_power(np.hstack(Cs), 4), rel=1e-9)


def test_rosenthal_variance_terms_match_gram_oracle():
    rng = np.random.default_rng(1)
    Cs = [rng.standard_normal((3, 4)) for _ in range(5)]
    rep = bounds.rosenthal_rhs(Cs, rademacher(), 2)
    row = sum(C @ C.T for C in Cs)
    col = sum(C.T @ C for C in Cs)
    # ||(sum C C^T)^{1/2}||_8^8 = tr (sum C C^T)^4
    assert rep.term("row_variance").schatten == pytest.approx(float(np.sum(np.linalg.eigvalsh(row) ** 4)), rel=1e-9)
    assert rep.term("column_variance").schatten == pytest.approx(float(np.sum(np.linalg.eigvalsh(col) ** 4)), rel=1e-9)
    assert rep.term("row_variance").log_constant == pytest.approx(6 * math.log(32), rel=1e-12)


def test_rosenthal_single_coefficient_diagonal_term():
    C = np.array([[2.0, 1.0], [0.0, 1.0]])
    dist = pbiased(0.3)
    rep = bounds.rosenthal_rhs([C], dist, 2)
    d = rep.term("diagonal")
    assert d.log_schatten == pytest.approx(linalg.log_schatten_power(C, 8), rel=1e-12)
    assert d.log_constant == pytest.approx(8 * math.log(16) + math.log(dist.moment(8)), rel=1e-12)
    lrep = bounds.rosenthal_rhs([C], dist, 2, moment_mode="L")
    assert lrep.term("diagonal").log_constant == pytest.approx(8 * math.log(16) + 8 * math.log(dist.L), rel=1e-12)


def test_rosenthal_zero_and_gaussian():
    assert bounds.rosenthal_rhs([], rademacher(), 2).log_total == -math.inf
    assert bounds.rosenthal_rhs([np.zeros((2, 2))], gaussian(), 2).total == 0.0
    rep = bounds.rosenthal_rhs([np.eye(2)], gaussian(), 2)
    assert rep.term("diagonal").log_constant == pytest.approx(8 * math.log(16) + math.log(105), rel=1e-12)
    with pytest.raises(InputError):
        bounds.rosenthal_rhs([np.eye(2)], gaussian(), 2, moment_mode="L")


def test_example_dominance_small_sample():
    F = corpus.example_quadratic()
    est = estimate_moment(F, SampleConfig(rademacher(), 3, 2000, 5, t=2), 8)
    for rep in (
        bounds.homogeneous_multilinear_bound(F, rademacher(), 2),
        bounds.multilinear_bound(F, rademacher(), 2),
        bounds.quadratic_bound(F, rademacher(), 2),
    ):
        assert est.log_upper() < rep.log_moment_power


def test_report_serialization():
    rep = bounds.multilinear_bound(corpus.random_multilinear(2, 4, (1, 2), dims=(2, 2)), rademacher(), 2)
    doc = json.loads(rep.to_json())
    assert doc["theorem"] == "multilinear" and len(doc["terms"]) == 3 + 6
    assert doc["total_mantissa10"] * 10 ** doc["total_exponent10"] == pytest.approx(rep.total, rel=1e-9)
    lines = rep.to_csv().strip().split("\n")
    assert lines[0] == "theorem,label,log_constant,schatten,log_contribution" and len(lines) == 10


def test_huge_totals_stay_in_log_space():
    F = corpus.random_multilinear(4, 6, 3, dims=(3, 3))
    rep = bounds.homogeneous_multilinear_bound(F, rademacher(), 40)
    assert math.isfinite(rep.log_total) and rep.log_total > math.log(1e300)
    assert rep.total == math.inf
    assert rep.to_dict()["total"] is None and rep.to_dict()["total_exponent10"] > 300


def test_check_t():
    for bad in (1, 0, 2.5, "2"):
        with pytest.raises(InputError):
            bounds.check_t(bad)


def test_trace_inequality():
    one = bounds.trace_inequality_check([np.array([[1.0, 2.0], [0.0, 3.0]])], 3)
    assert one.lhs == pytest.approx(one.rhs, rel=1e-12)
    hand = bounds.trace_inequality_check([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])], 2)
    assert hand.lhs == pytest.approx(2.0) and hand.rhs == pytest.approx(4.0) and hand.holds
    rng = np.random.default_rng(0)
    for r in (2, 3, 4):
        for _ in range(30):
            mats = [rng.standard_normal((3, 3)) for _ in range(3)]
            assert bounds.trace_inequality_check(mats, r).holds


def test_tail_from_moment():
    assert bounds.tail_from_moment(16.0, 4, 2.0) == pytest.approx(1.0)
    vals = [bounds.tail_from_moment(16.0, 4, th) for th in (2, 4, 8, 1e6)]
    assert vals == sorted(vals, reverse=True) and vals[-1] < 1e-20
    assert bounds.tail_from_log_moment(math.log(16.0), 4, 4.0) == pytest.approx(1 / 16)
