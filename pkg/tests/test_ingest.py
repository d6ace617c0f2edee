import math

import numpy as np
import pytest
from scipy import integrate, stats

from onum.core import DomainError, Instance, Network, check_marginal_bounds, linear_arrival, log_arrival
from onum.ingest import (
    BadValueError,
    EmptyRouteError,
    NegativeTrafficError,
    NonBinaryRoutingError,
    RoutingMatrix,
    RowLengthError,
    TrafficMatrix,
    UtilityDistSpec,
    coefficient_bounds,
    generate_synthetic_abilene,
    instance_to_text,
    load_instance,
    load_routing,
    load_traffic,
    make_episodes,
    rng_stream,
    save_instance,
    save_routing,
    save_traffic,
    synthesize_instance,
    truncated_gaussian,
    truncated_gaussian_array,
)


@pytest.fixture(scope="module")
def abilene():
    return generate_synthetic_abilene(42)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_small_traffic(tmp_path):
    tm = load_traffic(write(tmp_path, "t.csv", "1.0,2.0\n0.0,3.0\n"))
    assert tm.shape == (2, 2)
    assert np.array_equal(tm.volumes, [[1.0, 2.0], [0.0, 3.0]])


@pytest.mark.parametrize("text,err,row,col", [
    ("1,2\n3\n", RowLengthError, 1, None),
    ("1,x\n", BadValueError, 0, 1),
    ("1,-2\n", NegativeTrafficError, 0, 1),
    ("1,inf\n", NegativeTrafficError, 0, 1),
])
def test_traffic_errors(tmp_path, text, err, row, col):
    with pytest.raises(err) as exc:
        load_traffic(write(tmp_path, "t.csv", text))
    assert (exc.value.row, exc.value.col) == (row, col)


@pytest.mark.parametrize("text,err,row", [
    ("1,0\n0,1,1\n", RowLengthError, 1),
    ("1,2\n", NonBinaryRoutingError, 0),
    ("1,0\n0,0\n", EmptyRouteError, 1),
])
def test_routing_errors(tmp_path, text, err, row):
    with pytest.raises(err) as exc:
        load_routing(write(tmp_path, "r.csv", text))
    assert exc.value.row == row


def test_empty_route_message(tmp_path):
    with pytest.raises(EmptyRouteError, match="empty route, row 2"):
        load_routing(write(tmp_path, "r.csv", "1,0\n0,1\n0,0\n"))


def test_abilene_round_trip(tmp_path, abilene):
    traffic, routing = abilene
    save_traffic(traffic, tmp_path / "t.csv")
    save_routing(routing, tmp_path / "r.csv")
    t2, r2 = load_traffic(tmp_path / "t.csv"), load_routing(tmp_path / "r.csv")
    assert np.array_equal(t2.volumes, traffic.volumes)
    assert np.array_equal(r2.matrix, routing.matrix)
    save_traffic(t2, tmp_path / "t2.csv")
    save_routing(r2, tmp_path / "r2.csv")
    assert (tmp_path / "t.csv").read_bytes() == (tmp_path / "t2.csv").read_bytes()
    assert (tmp_path / "r.csv").read_bytes() == (tmp_path / "r2.csv").read_bytes()


def test_abilene_shape(abilene):
    traffic, routing = abilene
    assert traffic.shape == (2016, 110) and routing.shape == (110, 41)
    assert set(np.unique(routing.matrix)) == {0, 1}
    assert np.all(routing.matrix.sum(axis=1) >= 1)
    assert np.all(traffic.volumes >= 0)


def test_abilene_daily_period(abilene):
    traffic, _ = abilene
    days = traffic.volumes.reshape(7, 288, 110).mean(axis=2)
    corr = [np.corrcoef(days[d], days[d + 1])[0, 1] for d in range(6)]
    assert min(corr) > 0.9


def test_abilene_seeded(abilene):
    t2, r2 = generate_synthetic_abilene(42)
    assert np.array_equal(t2.volumes, abilene[0].volumes)
    assert np.array_equal(r2.matrix, abilene[1].matrix)


def test_truncated_gaussian_examples():
    rng = np.random.default_rng(0)
    x = truncated_gaussian_array(np.zeros(100_000), 1.0, -1e9, 1e9, rng)
    assert abs(x.mean()) < 0.02
    assert truncated_gaussian(5.0, 0.0, 0.0, 1.0, rng) == 1.0
    half = truncated_gaussian_array(np.zeros(100_000), 1.0, 0.0, 1e9, rng)
    ref, _ = integrate.quad(lambda t: t * 2 * stats.norm.pdf(t), 0, np.inf)
    assert ref == pytest.approx(math.sqrt(2 / math.pi))
    assert abs(half.mean() - ref) < 0.02
    with pytest.raises(DomainError):
        truncated_gaussian(0.0, 1.0, 2.0, 1.0, rng)


def test_truncated_gaussian_fallback_region():
    # acceptance mass ~1e-9: must use inverse-CDF and stay in bounds
    rng = np.random.default_rng(0)
    x = truncated_gaussian_array(np.zeros(2000), 1.0, 6.0, 7.0, rng)
    assert np.all((x >= 6.0) & (x <= 7.0))
    assert 6.0 < x.mean() < 6.4


def test_utility_spec():
    spec = UtilityDistSpec.fixed(5.0, 4.0, 2.0, 10.0)
    assert spec.sigma == 2.0
    assert np.all(spec.means(5) == 5.0)
    d = UtilityDistSpec.drift(2.0, 10.0, 1.0, 2.0, 10.0)
    assert np.allclose(d.means(5), [2, 4, 6, 8, 10])
    with pytest.raises(DomainError):
        UtilityDistSpec.fixed(1.0, 1.0, 3.0, 2.0)
    with pytest.raises(DomainError):
        UtilityDistSpec.fixed(1.0, -1.0, 1.0, 2.0)
    assert coefficient_bounds(1.0, 10.0) == (2.0, 10.0)


def _one_pair():
    return TrafficMatrix(np.array([[3.0]])), RoutingMatrix(np.array([[1, 0, 1]], dtype=np.int8))


def test_poisson_mean():
    traffic, routing = _one_pair()
    spec = UtilityDistSpec.fixed(3.0, 1.0, 2.0, 10.0)
    ss = np.random.SeedSequence(5).spawn(1000)
    counts = [len(synthesize_instance(traffic, routing, (0, 1), 50.0, spec, s)) for s in ss]
    assert abs(np.mean(counts) - 50.0) < 3 * math.sqrt(50) / math.sqrt(1000)


def test_zero_traffic_slot():
    traffic = TrafficMatrix(np.array([[0.0, 0.0], [1.0, 1.0]]))
    routing = RoutingMatrix(np.array([[1, 0], [0, 1]], dtype=np.int8))
    spec = UtilityDistSpec.fixed(3.0, 1.0, 2.0, 10.0)
    assert len(synthesize_instance(traffic, routing, (0, 1), 1e-3, spec, 0)) == 0


def test_synthesis_errors():
    traffic = TrafficMatrix(np.ones((2, 3)))
    routing = RoutingMatrix(np.ones((2, 2), dtype=np.int8))
    spec = UtilityDistSpec.fixed(3.0, 1.0, 2.0, 10.0)
    with pytest.raises(DomainError):
        synthesize_instance(traffic, routing, (0, 1), 1.0, spec, 0)
    with pytest.raises(DomainError):
        synthesize_instance(traffic, RoutingMatrix(np.ones((3, 2), dtype=np.int8)), (0, 1), 0.0, spec, 0)


def test_synthesis_invariants(abilene):
    traffic, routing = abilene
    lb, ub = coefficient_bounds(1.0, 10.0)
    spec = UtilityDistSpec.fixed(5.5, 3.0, lb, ub)
    inst = synthesize_instance(traffic, routing, (0, 288), 2.0, spec, 9)
    rows = {tuple(np.flatnonzero(r)) for r in routing.matrix}
    assert len(inst) > 300
    for arr in inst.arrivals:
        assert arr.links in rows
        assert arr.utility.k == len(arr.links)
        assert 0.0 <= arr.budget < 1.0
        assert lb <= arr.utility.a <= ub
    assert check_marginal_bounds(inst, 1.0, 10.0)


def test_synthesis_deterministic(abilene):
    traffic, routing = abilene
    spec = UtilityDistSpec.fixed(5.5, 1.0, 2.0, 10.0)
    a = synthesize_instance(traffic, routing, (10, 40), 3.0, spec, 123)
    b = synthesize_instance(traffic, routing, (10, 40), 3.0, spec, 123)
    assert instance_to_text(a) == instance_to_text(b)


def test_drift_is_monotone(abilene):
    traffic, routing = abilene
    spec = UtilityDistSpec.drift(2.0, 10.0, 1.0, 2.0, 10.0)
    inst = synthesize_instance(traffic, routing, (0, 288), 3.0, spec, 1)
    a = np.array([arr.utility.a for arr in inst.arrivals])
    k = len(a) // 10
    assert a[:k].mean() < a[-k:].mean()


def test_make_episodes_counts(abilene):
    traffic, routing = abilene
    spec = UtilityDistSpec.fixed(5.5, 1.0, 2.0, 10.0)
    assert len(make_episodes(traffic, routing, spec, 0)) == 7
    assert len(make_episodes(TrafficMatrix(traffic.volumes[:288]), routing, spec, 0)) == 1
    assert len(make_episodes(TrafficMatrix(traffic.volumes[:300]), routing, spec, 0)) == 1
    with pytest.raises(DomainError):
        make_episodes(TrafficMatrix(traffic.volumes[:287]), routing, spec, 0)


def test_instance_csv_round_trip(tmp_path, abilene):
    traffic, routing = abilene
    inst = synthesize_instance(traffic, routing, (0, 50), 2.0,
                               UtilityDistSpec.fixed(5.0, 1.0, 2.0, 10.0), 3)
    inst = Instance(inst.network, inst.arrivals + (linear_arrival(2.5, (0, 4), 0.25),))
    save_instance(inst, tmp_path / "i.csv")
    back = load_instance(tmp_path / "i.csv")
    assert back == inst
    assert instance_to_text(back) == (tmp_path / "i.csv").read_text()


def test_empty_instance_csv(tmp_path):
    save_instance(Instance(Network(5)), tmp_path / "e.csv")
    back = load_instance(tmp_path / "e.csv")
    assert back.link_count == 5 and len(back) == 0


def test_rng_streams_independent():
    a = rng_stream(1, "alpha").random(5)
    assert np.array_equal(a, rng_stream(1, "alpha").random(5))
    assert not np.array_equal(a, rng_stream(1, "beta").random(5))
    assert not np.array_equal(a, rng_stream(2, "alpha").random(5))
