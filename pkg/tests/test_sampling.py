from __future__ import annotations

import math

import numpy as np
import pytest

from polymat import corpus, linalg
from polymat.errors import InputError
from polymat.polymatrix import PolyMatrix, evaluate, gaussian, pbiased, rademacher
from polymat.sampling import (
    SampleConfig,
    batch_log_schatten,
    compare_scaled,
    decoupling_ratio,
    derive_seed,
    dominated,
    estimate_moment,
    rosenthal_empirical,
    run_chunks,
    sample_vector,
    summarize,
    summarize_logs,
    worker_count,
)


def test_example_second_moment_is_four():
    F = corpus.example_quadratic()
    exact = estimate_moment(F, SampleConfig(rademacher(), 3, 5000, 7, t=1), centered=False)
    assert exact.mean == pytest.approx(4.0, rel=1e-12) and exact.stderr == pytest.approx(0.0, abs=1e-12)
    est = estimate_moment(F, SampleConfig(pbiased(0.3), 3, 100_000, 7, t=1), centered=False)
    assert abs(est.mean - 4.0) < 4 * est.stderr


def test_constant_polynomial_centered_is_zero():
    C = PolyMatrix(2, (2, 2), {(): np.eye(2)})
    est = estimate_moment(C, SampleConfig(rademacher(), 2, 100, 1, t=2))
    assert est.mean == 0.0 and est.stderr == 0.0 and est.log_upper() == -math.inf


def test_matches_direct_loop():
    F = corpus.random_multilinear(1, 4, 2, dims=(3, 2))
    cfg = SampleConfig(pbiased(0.4), 4, 700, 3, t=2, chunk_size=128)
    est = estimate_moment(F, cfg, 8, centered=False, threads=1)
    vals = []
    for k, start in enumerate(range(0, 700, 128)):
        rng = np.random.default_rng([3, 0, k])
        X = cfg.dist.sample(rng, (min(128, 700 - start), 4))
        vals.extend(linalg.schatten_power(evaluate(F, x), 8) for x in X)
    vals = np.array(vals)
    assert est.mean == pytest.approx(vals.mean(), rel=1e-9)
    assert est.stderr == pytest.approx(vals.std(ddof=1) / math.sqrt(vals.size), rel=1e-6)


@pytest.mark.parametrize("threads", [1, 2, 5])
def test_thread_count_does_not_change_results(threads):
    F = corpus.random_multilinear(2, 5, 3, dims=(3, 3))
    cfg = SampleConfig(rademacher(), 5, 3000, 11, t=2, chunk_size=100)
    ref = estimate_moment(F, cfg, threads=1)
    got = estimate_moment(F, cfg, threads=threads)
    assert (got.mean, got.stderr, got.log_mean) == (ref.mean, ref.stderr, ref.log_mean)


def test_env_thread_count(monkeypatch):
    monkeypatch.setenv("POLYMAT_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(2) == 2
    monkeypatch.setenv("POLYMAT_THREADS", "many")
    with pytest.raises(InputError):
        worker_count()
    monkeypatch.delenv("POLYMAT_THREADS")
    assert worker_count() >= 1


def test_run_chunks_order_and_sizes():
    out = run_chunks(lambda rng, m: np.full(m, m, dtype=float), 10, 0, chunk_size=4, threads=3)
    assert out.tolist() == [4] * 4 + [4] * 4 + [2] * 2


def test_seeds_and_streams():
    assert derive_seed(1, 2) == derive_seed(1, 2) != derive_seed(2, 1)
    a = sample_vector(rademacher(), 20, 5, 0)
    assert np.array_equal(a, sample_vector(rademacher(), 20, 5, 0))
    assert not np.array_equal(a, sample_vector(rademacher(), 20, 5, 1))
    with pytest.raises(InputError):
        SampleConfig(rademacher(), 2, 10, -1)
    with pytest.raises(InputError):
        SampleConfig(rademacher(), 2, 0, 1)


def test_log_summaries_survive_overflow():
    lv = np.array([800.0, 800.0 + math.log(3.0)])
    est = summarize_logs(lv, "q")
    assert est.mean == math.inf and est.log_mean == pytest.approx(800.0 + math.log(2.0), rel=1e-12)
    assert est.log_upper() == est.log_mean
    plain = summarize(np.array([1.0, 3.0]), "q")
    assert plain.mean == pytest.approx(2.0) and plain.stderr == pytest.approx(1.0)


def test_batch_log_schatten():
    rng = np.random.default_rng(0)
    stack = rng.standard_normal((5, 3, 4))
    stack[2] = 0
    got = batch_log_schatten(stack, 6)
    assert got[2] == -math.inf
    for i in (0, 1, 3, 4):
        assert got[i] == pytest.approx(math.log(linalg.schatten_power(stack[i], 6)), rel=1e-12)


def test_degree_one_decoupling_is_identity_in_law():
    F = PolyMatrix(3, (2, 2), {(1,): np.eye(2), (2,): [[0, 1], [1, 0]], (3,): [[1, 0], [0, -1]]})
    res = decoupling_ratio(F, SampleConfig(gaussian(), 3, 20_000, 2, t=2))
    assert res.constant == 1.0 and res.holds
    assert abs(res.lhs.mean - res.rhs.mean) < 4 * math.hypot(res.lhs.stderr, res.rhs.stderr)


def test_example_decoupling():
    res = decoupling_ratio(corpus.example_quadratic(), SampleConfig(rademacher(), 3, 20_000, 3, t=2))
    assert res.constant == 4.0 and res.holds
    pw = decoupling_ratio(corpus.example_quadratic(), SampleConfig(rademacher(), 3, 5000, 3, t=2), mode="power")
    assert pw.constant == 4.0**8 and pw.holds


def test_compare_and_dominated():
    from polymat.sampling import MomentEstimate

    a = MomentEstimate(10.0, 1.0, 100, "a", math.log(10.0))
    b = MomentEstimate(2.0, 0.1, 100, "b", math.log(2.0))
    assert compare_scaled(a, b, 4.0, "x").holds  # 10 - 8 <= 4 * hypot(1, 0.4)
    assert not compare_scaled(a, b, 1.0, "x").holds
    assert dominated(a, math.log(14.0)).holds
    assert not dominated(a, math.log(13.9)).holds


def test_rosenthal_single_coefficient_exact_moment():
    C = np.array([[1.0, 2.0], [0.5, -1.0]])
    dist = pbiased(0.25)
    est, rhs, holds = rosenthal_empirical([C], dist, 2, SampleConfig(dist, 1, 200_000, 4))
    want = dist.moment(8) * linalg.schatten_power(C, 8)
    assert abs(est.mean - want) < 4 * est.stderr
    assert holds


def test_rosenthal_sweep_holds():
    for seed in range(10):
        Cs = corpus.random_linear_series(seed)
        _, _, holds = rosenthal_empirical(Cs, rademacher(), 2, SampleConfig(rademacher(), len(Cs), 2000, seed))
        assert holds
