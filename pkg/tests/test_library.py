import random

import pytest

import coachplan as cp
from coachplan.domain import BALL
from coachplan.errors import DuplicateFrameId, EmptyLibrary, InvalidPlan, KTooLarge
from coachplan.library import cluster_scenarios


def record(plan, scenario, frame_id, created_at="2024-01-01T00:00:00Z"):
    return cp.PlanRecord(plan, scenario, frame_id, created_at)


@pytest.fixture()
def kick_plan(schemas, roles):
    return cp.parse_plan("kick_to_goal STRIKER {}", schemas, roles)


def world_at(domain, x, y):
    text = f"AGENT s OWN STRIKER {x} {y} 0.0\nBALL {x} {y}\n"
    return cp.parse_world_file(text, domain)


def scenario_at(token):
    return cp.Scenario((("STRIKER", token), (BALL, token)))


class TestAdd:
    def test_append_preserves_order(self, kick_plan):
        lib = cp.new_library()
        lib = cp.add(lib, record(kick_plan, scenario_at("CENTER_FIELD"), "f1"))
        lib = cp.add(lib, record(kick_plan, scenario_at("LEFT_WING"), "f2"))
        assert lib.frame_ids() == ["f1", "f2"]

    def test_duplicate_frame_id(self, kick_plan):
        lib = cp.add(cp.new_library(), record(kick_plan, scenario_at("CENTER_FIELD"), "f1"))
        with pytest.raises(DuplicateFrameId):
            cp.add(lib, record(kick_plan, scenario_at("LEFT_WING"), "f1"))

    def test_optional_validation(self, kick_plan, schemas):
        rec = record(kick_plan, scenario_at("CENTER_FIELD"), "f1")
        held = frozenset({cp.Predicate("ball_held_by", ("STRIKER",))})
        assert cp.add(cp.new_library(), rec, schemas, held).frame_ids() == ["f1"]
        with pytest.raises(InvalidPlan):
            cp.add(cp.new_library(), rec, schemas, frozenset())


class TestSelectPlan:
    def test_empty_library(self, domain):
        with pytest.raises(EmptyLibrary):
            cp.select_plan(cp.new_library(), world_at(domain, 0, 0), domain)

    def test_picks_nearest(self, domain, kick_plan):
        lib = cp.new_library()
        lib = cp.add(lib, record(kick_plan, scenario_at("OUR_GOAL"), "back"))
        lib = cp.add(lib, record(kick_plan, scenario_at("KICKING_POSITION"), "front"))
        assert cp.select_plan(lib, world_at(domain, 3.1, 0.1), domain).frame_id == "front"
        assert cp.select_plan(lib, world_at(domain, -4.2, 0.0), domain).frame_id == "back"

    def test_tie_breaks_on_created_at_then_frame_id(self, domain, kick_plan):
        scen = scenario_at("CENTER_FIELD")
        lib = cp.new_library()
        lib = cp.add(lib, record(kick_plan, scen, "zz", "2024-01-02T00:00:00Z"))
        lib = cp.add(lib, record(kick_plan, scen, "aa", "2024-01-01T00:00:00Z"))
        assert cp.select_plan(lib, world_at(domain, 0, 0), domain).frame_id == "aa"
        lib2 = cp.new_library()
        lib2 = cp.add(lib2, record(kick_plan, scen, "zz"))
        lib2 = cp.add(lib2, record(kick_plan, scen, "aa"))
        assert cp.select_plan(lib2, world_at(domain, 0, 0), domain).frame_id == "aa"

    def test_matches_brute_force(self, domain, kick_plan):
        rng = random.Random(17)
        tokens = sorted(domain.waypoints)
        lib = cp.new_library()
        for i in range(40):
            lib = cp.add(lib, record(kick_plan, scenario_at(rng.choice(tokens)), f"f{i:02d}"))
        for _ in range(25):
            world = world_at(domain, rng.uniform(-4, 4), rng.uniform(-2.5, 2.5))
            current = cp.scenario_from_world(world, domain)
            expected = min(
                lib.records,
                key=lambda r: (
                    cp.scenario_distance(r.scenario, current, domain),
                    r.created_at,
                    r.frame_id,
                ),
            )
            assert cp.select_plan(lib, world, domain).frame_id == expected.frame_id


class TestCluster:
    def test_k_bounds(self, domain, kick_plan):
        lib = cp.add(cp.new_library(), record(kick_plan, scenario_at("CENTER_FIELD"), "f1"))
        with pytest.raises(KTooLarge):
            cluster_scenarios(lib, 2, domain)
        with pytest.raises(KTooLarge):
            cluster_scenarios(lib, 0, domain)

    def test_k_equals_n(self, domain, kick_plan):
        lib = cp.new_library()
        for i, token in enumerate(["OUR_GOAL", "CENTER_FIELD", "OPPONENT_GOAL"]):
            lib = cp.add(lib, record(kick_plan, scenario_at(token), f"f{i}"))
        clusters = cluster_scenarios(lib, 3, domain)
        assert sorted(m.frame_id for m, _ in clusters) == ["f0", "f1", "f2"]
        assert all(members == [m.frame_id] for m, members in clusters)

    def test_separated_groups_recovered(self, domain, kick_plan):
        # Two tight groups at opposite ends of the field.
        lib = cp.new_library()
        back = ["OUR_GOAL", "OUR_PENALTY_MARK", "OUR_LEFT_DEFENSE"]
        front = ["OPPONENT_GOAL", "OPPONENT_PENALTY_MARK", "KICKING_POSITION"]
        for i, token in enumerate(back):
            lib = cp.add(lib, record(kick_plan, scenario_at(token), f"back{i}"))
        for i, token in enumerate(front):
            lib = cp.add(lib, record(kick_plan, scenario_at(token), f"front{i}"))
        clusters = cluster_scenarios(lib, 2, domain)
        memberships = sorted(tuple(members) for _, members in clusters)
        assert memberships == [
            ("back0", "back1", "back2"),
            ("front0", "front1", "front2"),
        ]

    def test_deterministic(self, domain, kick_plan):
        rng = random.Random(9)
        tokens = sorted(domain.waypoints)
        lib = cp.new_library()
        for i in range(12):
            lib = cp.add(lib, record(kick_plan, scenario_at(rng.choice(tokens)), f"f{i:02d}"))
        a = cluster_scenarios(lib, 3, domain)
        b = cluster_scenarios(lib, 3, domain)
        assert [(m.frame_id, tuple(ms)) for m, ms in a] == [
            (m.frame_id, tuple(ms)) for m, ms in b
        ]

    def test_partition(self, domain, kick_plan):
        rng = random.Random(4)
        tokens = sorted(domain.waypoints)
        lib = cp.new_library()
        for i in range(10):
            lib = cp.add(lib, record(kick_plan, scenario_at(rng.choice(tokens)), f"f{i}"))
        clusters = cluster_scenarios(lib, 4, domain)
        all_members = sorted(fid for _, members in clusters for fid in members)
        assert all_members == sorted(lib.frame_ids())


class TestPersistence:
    def test_round_trip(self, tmp_path, domain, schemas, roles, corpus_plans):
        lib = cp.new_library()
        names = sorted(corpus_plans)[:5]
        tokens = ["OUR_GOAL", "CENTER_FIELD", "LEFT_WING", "RIGHT_WING", "OPPONENT_GOAL"]
        for name, token in zip(names, tokens):
            lib = cp.add(lib, record(corpus_plans[name], scenario_at(token), name))
        path = tmp_path / "lib"
        cp.save_library(lib, path)
        again = cp.load_library(path, schemas, roles, domain)
        assert again == lib

    def test_missing_directory_is_empty(self, tmp_path, domain, schemas, roles):
        lib = cp.load_library(tmp_path / "nope", schemas, roles, domain)
        assert lib == cp.new_library()

    def test_save_empty(self, tmp_path, domain, schemas, roles):
        path = tmp_path / "lib"
        cp.save_library(cp.new_library(), path)
        assert cp.load_library(path, schemas, roles, domain) == cp.new_library()
