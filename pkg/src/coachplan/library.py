"""Scenario-keyed plan library: persistence, nearest-scenario selection and
k-medoids clustering under the scenario distance."""
from __future__ import annotations

import os
from dataclasses import dataclass

from .coach import parse_scenario_block
from .domain import Domain, Scenario, WorldState, scenario_distance, scenario_from_world, serialize_scenario
from .errors import DuplicateFrameId, EmptyLibrary, InvalidPlan, KTooLarge
from .planlang import Plan, parse_plan, serialize_plan
from .refine import validate_plan


@dataclass(frozen=True)
class PlanRecord:
    plan: Plan
    scenario: Scenario
    frame_id: str
    created_at: str  # ISO-8601, lexicographically ordered


@dataclass(frozen=True)
class Library:
    records: tuple  # of PlanRecord, insertion ordered

    def frame_ids(self):
        return [r.frame_id for r in self.records]


def new_library() -> Library:
    return Library(())


def add(library: Library, record: PlanRecord, schemas=None, initial=None) -> Library:
    """Append a record; frame ids stay unique.  When schemas and an initial
    state are supplied the plan must validate cleanly."""
    if record.frame_id in library.frame_ids():
        raise DuplicateFrameId(record.frame_id)
    if schemas is not None and initial is not None:
        report = validate_plan(record.plan, schemas, initial)
        if not report.ok:
            raise InvalidPlan(report.serialize())
    return Library(library.records + (record,))


def select_plan(library: Library, world: WorldState, domain: Domain) -> PlanRecord:
    """Record whose stored scenario is nearest to the world's scenario; ties
    broken by earliest created_at, then frame_id."""
    if not library.records:
        raise EmptyLibrary("cannot select from an empty library")
    current = scenario_from_world(world, domain)
    return min(
        library.records,
        key=lambda r: (
            scenario_distance(r.scenario, current, domain),
            r.created_at,
            r.frame_id,
        ),
    )


def cluster_scenarios(library: Library, k: int, domain: Domain):
    """Deterministic k-medoids over scenario distance.

    Seeding is farthest-first from the lexicographically-first frame_id;
    assignment and medoid updates break ties by frame_id.  Returns a list of
    (medoid record, sorted member frame_ids).
    """
    records = library.records
    if k < 1 or k > len(records):
        raise KTooLarge(f"k={k} with {len(records)} records")
    dist = {
        (a.frame_id, b.frame_id): scenario_distance(a.scenario, b.scenario, domain)
        for a in records
        for b in records
    }
    by_id = {r.frame_id: r for r in records}
    medoids = [min(r.frame_id for r in records)]
    while len(medoids) < k:
        best = max(
            (r.frame_id for r in records if r.frame_id not in medoids),
            key=lambda fid: (min(dist[(fid, m)] for m in medoids), fid),
        )
        medoids.append(best)

    def assign(medoid_ids):
        clusters = {m: [] for m in medoid_ids}
        for r in records:
            nearest = min(sorted(medoid_ids), key=lambda m: (dist[(r.frame_id, m)], m))
            clusters[nearest].append(r.frame_id)
        return clusters

    while True:
        clusters = assign(medoids)
        new_medoids = []
        for m in medoids:
            members = clusters[m]
            new_m = min(
                sorted(members),
                key=lambda c: (sum(dist[(c, o)] for o in members), c),
            )
            new_medoids.append(new_m)
        if set(new_medoids) == set(medoids):
            break
        medoids = new_medoids
    clusters = assign(medoids)
    return [
        (by_id[m], sorted(clusters[m]))
        for m in sorted(medoids)
    ]


# --- persistence -----------------------------------------------------------

MANIFEST = "manifest.txt"


def save_library(library: Library, path):
    os.makedirs(path, exist_ok=True)
    lines = []
    for record in library.records:
        lines.append(f"{record.frame_id}\t{record.created_at}")
        with open(os.path.join(path, f"{record.frame_id}.plan"), "w") as fh:
            fh.write(serialize_plan(record.plan))
        with open(os.path.join(path, f"{record.frame_id}.scenario"), "w") as fh:
            fh.write(serialize_scenario(record.scenario) + "\n")
    with open(os.path.join(path, MANIFEST), "w") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))


def load_library(path, schemas: dict, roles: dict, domain: Domain) -> Library:
    manifest = os.path.join(path, MANIFEST)
    if not os.path.exists(manifest):
        return new_library()
    records = []
    with open(manifest) as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line:
                continue
            frame_id, created_at = line.split("\t")
            with open(os.path.join(path, f"{frame_id}.plan")) as pf:
                plan = parse_plan(pf.read(), schemas, roles)
            with open(os.path.join(path, f"{frame_id}.scenario")) as sf:
                scenario = parse_scenario_block(sf.read(), domain)
            records.append(PlanRecord(plan, scenario, frame_id, created_at))
    return Library(tuple(records))
