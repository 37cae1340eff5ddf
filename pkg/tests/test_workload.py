import math

import numpy as np
import pytest

from cachefed.core import SECONDS_PER_DAY, ValidationError
from cachefed.ingest import write_trace
from cachefed.workload import WorkloadSpec, generate_trace, make_rng, zipf_probabilities, zipf_sample

DRAWS = 100_000


def within_3_sigma(ranks, probs):
    counts = np.bincount(ranks, minlength=len(probs) + 1)[1:]
    for count, p in zip(counts, probs):
        sigma = math.sqrt(DRAWS * p * (1 - p))
        assert abs(count - DRAWS * p) <= 3 * sigma, (count, DRAWS * p, sigma)


def test_single_rank():
    rng = make_rng(1)
    assert {zipf_sample(2.5, 1, rng) for _ in range(100)} == {1}


def test_uniform_when_exponent_zero():
    ranks = zipf_sample(0.0, 4, make_rng(7), size=DRAWS)
    within_3_sigma(ranks, [0.25] * 4)


def test_exponent_one_closed_form():
    # normalizer 1 + 1/2 + 1/3 = 11/6
    expected = [6 / 11, 3 / 11, 2 / 11]
    assert np.allclose(zipf_probabilities(1.0, 3), expected, rtol=0, atol=1e-15)
    within_3_sigma(zipf_sample(1.0, 3, make_rng(11), size=DRAWS), expected)


def test_scalar_and_vector_draws_agree():
    rng = make_rng(3)
    a = [zipf_sample(1.2, 50, rng) for _ in range(200)]
    b = list(zipf_sample(1.2, 50, make_rng(3), size=200))
    assert a == b
    assert all(1 <= r <= 50 for r in a)


def test_domain_errors():
    with pytest.raises(ValueError):
        zipf_sample(1.0, 0, make_rng(0))
    with pytest.raises(ValueError):
        zipf_sample(-0.5, 3, make_rng(0))


def spec(**kw):
    base = dict(n_files=50, zipf_exponent=1.0, mean_file_size_bytes=10**6, size_sigma=1.0,
                requests_per_day=100, n_days=3, start_timestamp=1_625_097_600, seed=5)
    base.update(kw)
    return WorkloadSpec(**base)


def test_rejects_zero_days():
    with pytest.raises(ValidationError, match="n_days"):
        generate_trace(spec(n_days=0))


def test_from_dict_validation():
    with pytest.raises(ValidationError) as exc:
        WorkloadSpec.from_dict({"n_files": 1, "bogus": 3})
    assert "unknown workload key: bogus" in exc.value.errors
    assert any("missing workload key" in e for e in exc.value.errors)


def test_single_file():
    events = generate_trace(spec(n_files=1, requests_per_day=10, n_days=1))
    assert len(events) == 10
    assert len({e.file for e in events}) == 1
    assert len({e.size_bytes for e in events}) == 1


def test_shape_and_order():
    s = spec()
    events = generate_trace(s)
    assert len(events) == s.n_days * s.requests_per_day
    ts = [e.timestamp for e in events]
    assert ts == sorted(ts)
    for i, e in enumerate(events):
        day = i // s.requests_per_day
        assert s.start_timestamp + day * SECONDS_PER_DAY <= e.timestamp
        assert e.timestamp < s.start_timestamp + (day + 1) * SECONDS_PER_DAY
    sizes = {}
    for e in events:
        assert sizes.setdefault(e.file, e.size_bytes) == e.size_bytes


def test_deterministic_by_seed():
    assert write_trace(generate_trace(spec())) == write_trace(generate_trace(spec()))
    assert write_trace(generate_trace(spec())) != write_trace(generate_trace(spec(seed=6)))


def test_sizes_log_normal_median():
    events = generate_trace(spec(n_files=4000, requests_per_day=1, n_days=1))
    from cachefed.workload import file_sizes
    sizes = file_sizes(spec(n_files=4000), make_rng(5))
    median = float(np.median(sizes))
    assert 0.9e6 < median < 1.1e6
    assert events[0].size_bytes in set(sizes.tolist())
