import numpy as np
import pytest

from gridsignal.demand import (
    DemandError,
    FluctuationSpec,
    ODEntry,
    ODMatrix,
    export_departures,
    fluctuate,
    generate,
    od_matrix_from_csv,
    od_matrix_to_csv,
)
from gridsignal.network import build_grid


@pytest.fixture(scope="module")
def topo():
    return build_grid(3, 3)


def hundred_vehicle_pair(topo, seed=0):
    od = ODMatrix(entries=(ODEntry("T3W", "T5E", 100, 0, 1000),))
    return generate(od, topo, seed=seed)


class TestGenerate:
    def test_zero_count_entry(self, topo):
        od = ODMatrix(entries=(ODEntry("T3W", "T5E", 0, 0, 100),))
        assert generate(od, topo, seed=1) == []

    def test_departures_inside_window(self, topo):
        od = ODMatrix(entries=(ODEntry("T3W", "T5E", 100, 0, 1000),))
        vehicles = generate(od, topo, seed=3)
        assert len(vehicles) == 100
        assert all(0 <= v.departure_time < 1000 for v in vehicles)

    def test_deterministic_given_seed(self, topo):
        a = generate(ODMatrix(entries=(ODEntry("T3W", "T5E", 50, 0, 500),)), topo, seed=7)
        b = generate(ODMatrix(entries=(ODEntry("T3W", "T5E", 50, 0, 500),)), topo, seed=7)
        assert [(v.id, v.departure_time) for v in a] == [(v.id, v.departure_time) for v in b]

    def test_ids_follow_od_pattern(self, topo):
        vehicles = hundred_vehicle_pair(topo)
        assert vehicles[0].id == "T3W-T5E-0"
        assert len({v.id for v in vehicles}) == 100

    def test_invalid_window_rejected(self):
        with pytest.raises(DemandError):
            ODEntry("A", "B", 10, 100, 100)
        with pytest.raises(DemandError):
            ODEntry("A", "B", -1, 0, 100)


class TestFluctuate:
    def test_increase_adds_suffixed_duplicates(self, topo):
        vehicles = hundred_vehicle_pair(topo)
        for seed in range(200):
            out = fluctuate(vehicles, FluctuationSpec(ratio=0.2, seed=seed))
            if len(out) == 120:
                dupes = [v for v in out if v.id.endswith("A")]
                assert len(dupes) == 20
                originals = {v.id: v for v in vehicles}
                for dup in dupes:
                    src = originals[dup.id.rstrip("A")]
                    assert abs(dup.departure_time - src.departure_time) <= 1.0
                return
        pytest.fail("no increase draw in 200 seeds")

    def test_decrease_keeps_only_original_ids(self, topo):
        vehicles = hundred_vehicle_pair(topo)
        ids = {v.id for v in vehicles}
        for seed in range(200):
            out = fluctuate(vehicles, FluctuationSpec(ratio=0.2, seed=seed))
            if len(out) == 80:
                assert {v.id for v in out} <= ids
                return
        pytest.fail("no decrease draw in 200 seeds")

    def test_only_two_possible_sizes(self, topo):
        vehicles = hundred_vehicle_pair(topo)
        sizes = {
            len(fluctuate(vehicles, FluctuationSpec(ratio=0.2, seed=s))) for s in range(300)
        }
        assert sizes == {80, 120}

    def test_odd_counts_round_half_up(self, topo):
        od = ODMatrix(entries=(ODEntry("T3W", "T5E", 7, 0, 100),))
        vehicles = generate(od, topo, seed=0)
        sizes = {len(fluctuate(vehicles, FluctuationSpec(ratio=0.3, seed=s))) for s in range(300)}
        # k = round(7 * 0.3) = 2, m = round(7 * 0.7) = 5
        assert sizes == {5, 9}

    def test_tiny_ratio_is_identity_in_size(self, topo):
        vehicles = hundred_vehicle_pair(topo)
        for seed in range(20):
            out = fluctuate(vehicles, FluctuationSpec(ratio=0.001, seed=seed))
            assert sorted(v.departure_time for v in out) == sorted(
                v.departure_time for v in vehicles
            )

    def test_untouched_pairs_pass_through(self, topo):
        od = ODMatrix(
            entries=(ODEntry("T3W", "T5E", 40, 0, 500), ODEntry("T0N", "T6S", 30, 0, 500))
        )
        vehicles = generate(od, topo, seed=2)
        out = fluctuate(vehicles, FluctuationSpec(ratio=0.2, seed=3), od_pairs=[("T3W", "T5E")])
        untouched = [v for v in out if v.origin == "T0N"]
        assert untouched == [v for v in vehicles if v.origin == "T0N"]

    def test_empty_group_consumes_direction_draw(self, topo):
        # A leading empty OD pair must not change how many draws later pairs
        # see, only shift them deterministically.
        vehicles = hundred_vehicle_pair(topo)
        with_empty = fluctuate(
            vehicles,
            FluctuationSpec(ratio=0.2, seed=11),
            od_pairs=[("X", "Y"), ("T3W", "T5E")],
        )
        without = fluctuate(
            vehicles, FluctuationSpec(ratio=0.2, seed=11), od_pairs=[("T3W", "T5E")]
        )
        assert len(with_empty) in (80, 120) and len(without) in (80, 120)

    def test_mean_size_over_many_seeds_near_original(self, topo):
        # Monte-Carlo oracle: increase (+20) and decrease (-20) are
        # equiprobable, so the long-run mean stays near 100.
        vehicles = hundred_vehicle_pair(topo)
        sizes = [len(fluctuate(vehicles, FluctuationSpec(ratio=0.2, seed=s))) for s in range(1000)]
        assert 99 <= np.mean(sizes) <= 101

    def test_bad_ratio_rejected(self):
        with pytest.raises(DemandError):
            FluctuationSpec(ratio=0.0, seed=1)
        with pytest.raises(DemandError):
            FluctuationSpec(ratio=1.0, seed=1)


class TestCsvRoundTrips:
    def test_od_matrix_roundtrip(self, tmp_path):
        od = ODMatrix(
            entries=(ODEntry("T3W", "T5E", 40, 0.0, 500.0), ODEntry("T0N", "T6S", 3, 10.0, 20.0))
        )
        path = tmp_path / "od.csv"
        od_matrix_to_csv(od, str(path))
        assert od_matrix_from_csv(str(path)) == od

    def test_departure_export(self, tmp_path, topo):
        vehicles = hundred_vehicle_pair(topo)[:3]
        path = tmp_path / "dep.csv"
        export_departures(vehicles, str(path))
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "id,origin,destination,departure_time_s"
        assert len(lines) == 4
