"""Command-line entry point wiring the pipeline end to end.

Exit codes: 0 success, 1 validation violations, 2 parse/config errors,
3 provider failures.
"""
from __future__ import annotations

import argparse
import glob
import json
import os
import sys

from . import library as planlib
from .actions import (
    MockEmbeddingProvider,
    RecordedEmbeddingProvider,
    build_index,
    parse_action_file,
)
from .coach import retrieve_roles
from .domain import (
    Agent,
    PlanningGoal,
    Tactics,
    WorldState,
    parse_domain_file,
    parse_world_file,
    scenario_from_world,
    serialize_scenario,
)
from .errors import (
    CoachPlanError,
    ProviderError,
    StageError,
    ValidationFailed,
)
from .executor import (
    SimConfig,
    aggregate,
    compile_fsm,
    format_metrics_delimited,
    format_metrics_table,
    make_opponent_policy,
    run_match,
)
from .pipeline import DEFAULT_GOAL, make_record, run_generate
from .planlang import parse_plan, serialize_plan
from .providers import OpenAIChatProvider, RecordingChatProvider, ReplayChatProvider, Transcript
from .refine import parse_facts_file, validate_plan

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_PARSE = 2
EXIT_PROVIDER = 3


def _read(path):
    with open(path) as fh:
        return fh.read()


def _load_domain_actions(args):
    domain = parse_domain_file(_read(args.domain))
    schemas = parse_action_file(_read(args.actions))
    return domain, schemas


def _embed_provider(args):
    if getattr(args, "embeddings", None):
        return RecordedEmbeddingProvider(args.embeddings)
    return MockEmbeddingProvider()


def _chat_provider(args):
    if args.transcript:
        # Replay mode: never touches the network, never reads credentials.
        return ReplayChatProvider(Transcript.load(args.transcript))
    if args.provider:
        live = OpenAIChatProvider(model=args.provider)
        return RecordingChatProvider(live)
    raise CoachPlanError("either --transcript or --provider is required")


def _sim_config(args) -> SimConfig:
    if getattr(args, "sim_config", None):
        with open(args.sim_config) as fh:
            payload = json.load(fh)
        payload.pop("opponents", None)
        return SimConfig(**payload)
    return SimConfig()


def _config_hash(args, keys):
    import hashlib

    payload = {k: getattr(args, k, None) for k in keys}
    blob = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _world_for_plan(world: WorldState, fsm_agents, record, domain) -> WorldState:
    """Rename own agents to the plan's role names when needed, using
    minimum-cost matching against the record's scenario."""
    if all(aid in world.agents for aid in fsm_agents):
        return world
    mapping = retrieve_roles(world, record.scenario, domain)
    agents = {}
    for agent_id, (pose, agent) in world.agents.items():
        if agent_id in mapping:
            role = mapping[agent_id]
            agents[role] = (pose, Agent(role, agent.team, role))
        else:
            agents[agent_id] = (pose, agent)
    return WorldState(agents, world.ball, world.timestamp)


# --- subcommands -----------------------------------------------------------

def cmd_ingest_actions(args):
    schemas = parse_action_file(_read(args.actions))
    provider = MockEmbeddingProvider(dim=args.dim)
    import hashlib

    lines = []
    for schema in schemas:
        emb = provider.embed(schema.description)
        key = hashlib.sha256(schema.description.encode()).hexdigest()
        lines.append(key + " " + " ".join(f"{v:.9g}" for v in emb.vector))
    with open(args.out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"indexed {len(schemas)} actions -> {args.out}")
    return EXIT_OK


def cmd_generate(args):
    domain, schemas = _load_domain_actions(args)
    world = parse_world_file(_read(args.world), domain)
    chat = _chat_provider(args)
    embed = _embed_provider(args)
    goal = PlanningGoal(args.goal) if args.goal else DEFAULT_GOAL
    config_hash = _config_hash(
        args, ["domain", "actions", "world", "transcript", "k", "tactics", "seed", "goal"]
    )
    manifest, plan, scenario = run_generate(
        domain, schemas, world, chat, embed,
        k=args.k, goal=goal, tactics=Tactics(args.tactics or ""),
        config_hash=config_hash,
    )
    if args.library:
        lib = planlib.load_library(
            args.library, {s.action_id: s for s in schemas}, domain.roles, domain
        )
        record = make_record(plan, scenario, args.frame_id, args.created_at)
        lib = planlib.add(lib, record)
        planlib.save_library(lib, args.library)
    if args.manifest:
        with open(args.manifest, "w") as fh:
            fh.write(manifest.to_json())
    print(f"manifest_hash {manifest.manifest_hash()}")
    print(serialize_plan(plan), end="")
    return EXIT_OK


def cmd_validate(args):
    domain, schemas = _load_domain_actions(args)
    plan = parse_plan(_read(args.plan), {s.action_id: s for s in schemas}, domain.roles)
    initial = parse_facts_file(_read(args.initial)) if args.initial else frozenset()
    report = validate_plan(plan, {s.action_id: s for s in schemas}, initial)
    if args.format == "lines":
        sys.stdout.write(report.serialize())
    else:
        if report.ok:
            print("plan is valid: no violations")
        else:
            print(f"{len(report.violations)} violation(s):")
            sys.stdout.write(report.serialize())
    return EXIT_OK if report.ok else EXIT_VIOLATIONS


def cmd_simulate(args):
    domain, schemas = _load_domain_actions(args)
    world = parse_world_file(_read(args.world), domain)
    plan = parse_plan(_read(args.plan), {s.action_id: s for s in schemas}, domain.roles)
    fsms = compile_fsm(plan)
    config = _sim_config(args)
    policy = make_opponent_policy(args.opponents, seed=args.seed)
    result = run_match(fsms, world, domain, config, policy)
    print(f"success={result.success} passes={result.passes} "
          f"scoring_time={result.scoring_time}")
    if args.trace_out:
        with open(args.trace_out, "w") as fh:
            fh.write(result.trace_text())
    elif args.trace:
        sys.stdout.write(result.trace_text())
    return EXIT_OK


def cmd_evaluate(args):
    domain, schemas = _load_domain_actions(args)
    schemas_by_id = {s.action_id: s for s in schemas}
    lib = planlib.load_library(args.library, schemas_by_id, domain.roles, domain)
    if not lib.records:
        raise CoachPlanError("library is empty")
    world_files = sorted(glob.glob(os.path.join(args.scenarios, "*.world")))
    if not world_files:
        raise CoachPlanError(f"no *.world files in {args.scenarios}")
    config = _sim_config(args)
    results = []
    for path in world_files:
        world = parse_world_file(_read(path), domain)
        record = planlib.select_plan(lib, world, domain)
        fsms = compile_fsm(record.plan)
        world = _world_for_plan(world, fsms, record, domain)
        policy = make_opponent_policy(args.opponents, seed=args.seed)
        results.append(run_match(fsms, world, domain, config, policy))
    metrics = aggregate(results)
    if args.format == "tsv":
        sys.stdout.write(format_metrics_delimited(metrics))
    else:
        sys.stdout.write(format_metrics_table(metrics))
    return EXIT_OK


def cmd_library(args):
    domain, schemas = _load_domain_actions(args)
    schemas_by_id = {s.action_id: s for s in schemas}
    lib = planlib.load_library(args.library, schemas_by_id, domain.roles, domain)
    if args.library_cmd == "ls":
        for record in lib.records:
            print(f"{record.frame_id}\t{record.created_at}\t"
                  f"{len(record.plan.steps)} steps")
        return EXIT_OK
    if args.library_cmd == "add":
        plan = parse_plan(_read(args.plan), schemas_by_id, domain.roles)
        from .coach import parse_scenario_block

        scenario = parse_scenario_block(_read(args.scenario), domain)
        record = planlib.PlanRecord(plan, scenario, args.frame_id, args.created_at)
        lib = planlib.add(lib, record)
        planlib.save_library(lib, args.library)
        print(f"added {args.frame_id}")
        return EXIT_OK
    if args.library_cmd == "select":
        world = parse_world_file(_read(args.world), domain)
        record = planlib.select_plan(lib, world, domain)
        print(record.frame_id)
        print(serialize_scenario(scenario_from_world(world, domain)))
        print(serialize_plan(record.plan), end="")
        return EXIT_OK
    raise CoachPlanError(f"unknown library command {args.library_cmd!r}")


# --- argument parsing ------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="coachplan",
        description="Offline multi-agent soccer plan generation, validation and simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest-actions", help="embed an action file to a recorded-embedding file")
    p.add_argument("--actions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=16)
    p.set_defaults(func=cmd_ingest_actions)

    p = sub.add_parser("generate", help="run the four-stage generation pipeline")
    p.add_argument("--domain", required=True)
    p.add_argument("--actions", required=True)
    p.add_argument("--world", required=True)
    p.add_argument("--transcript", help="replay transcript (offline mode)")
    p.add_argument("--provider", help="live chat model name (records a transcript)")
    p.add_argument("--embeddings", help="recorded-embedding file (default: mock provider)")
    p.add_argument("--library", help="library directory to append the plan to")
    p.add_argument("--manifest", help="write the run manifest JSON here")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--tactics", default="")
    p.add_argument("--goal", default="")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frame-id", default="frame_0")
    p.add_argument("--created-at", default="1970-01-01T00:00:00Z")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="validate a plan file")
    p.add_argument("--plan", required=True)
    p.add_argument("--actions", required=True)
    p.add_argument("--domain", required=True)
    p.add_argument("--initial", help="initial facts file")
    p.add_argument("--format", choices=["human", "lines"], default="human")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="run one plan in the simulator")
    p.add_argument("--plan", required=True)
    p.add_argument("--actions", required=True)
    p.add_argument("--domain", required=True)
    p.add_argument("--world", required=True)
    p.add_argument("--sim-config", help="JSON file overriding simulator defaults")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--opponents", default="STATIC",
                   choices=["STATIC", "NEAREST_INTERCEPT"])
    p.add_argument("--trace", action="store_true", help="print the event trace")
    p.add_argument("--trace-out", help="write the event trace to a file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="select and run plans over a scenario set")
    p.add_argument("--library", required=True)
    p.add_argument("--scenarios", required=True, help="directory of *.world files")
    p.add_argument("--domain", required=True)
    p.add_argument("--actions", required=True)
    p.add_argument("--sim-config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--opponents", default="STATIC",
                   choices=["STATIC", "NEAREST_INTERCEPT"])
    p.add_argument("--format", choices=["table", "tsv"], default="table")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("library", help="inspect or edit a plan library")
    p.add_argument("library_cmd", choices=["ls", "add", "select"])
    p.add_argument("--library", required=True)
    p.add_argument("--domain", required=True)
    p.add_argument("--actions", required=True)
    p.add_argument("--plan")
    p.add_argument("--scenario")
    p.add_argument("--frame-id")
    p.add_argument("--created-at", default="1970-01-01T00:00:00Z")
    p.add_argument("--world")
    p.set_defaults(func=cmd_library)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationFailed as exc:
        print(f"FAILED at stage {exc.stage}:\n{exc}", file=sys.stderr)
        return EXIT_VIOLATIONS
    except StageError as exc:
        print(f"FAILED at stage {exc.stage}: {exc}", file=sys.stderr)
        if isinstance(exc.__cause__, ProviderError):
            return EXIT_PROVIDER
        return EXIT_PARSE
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except (CoachPlanError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
