"""Coach prompt assembly, response parsing and role retrieval.

The coach model performs two tasks in one call: describe the frame as a
SCENARIO block (role/ball to waypoint assignments) and emit free-form
high-level advice under a COACH ADVICE header.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.optimize import linear_sum_assignment

from .domain import BALL, OWN, Domain, Scenario, WorldState
from .errors import (
    CardinalityMismatch,
    DuplicateSubject,
    MissingAdviceBlock,
    MissingScenarioBlock,
    UnknownSubject,
    UnknownWaypoint,
    UnresolvedPlaceholder,
)
from .providers import ChatRequest

SYSTEM_TEXT = "You are the coach of a robot soccer team playing in the RoboCup Standard Platform League."

ADVICE_HEADER = "COACH ADVICE:"

DEFAULT_SCENARIO_EXAMPLE = """\
SCENARIO:
STRIKER is at CENTER_FIELD
JOLLY is at FORWARD_LEFT
OPPONENT_1 is at OPPONENT_PENALTY_MARK
BALL is at CENTER_FIELD"""

# Slots filled by build_coach_prompt; skeleton brackets such as
# [ROLE_OWN_TEAM] are shown to the model verbatim and stay in place.
_COACH_SLOTS = (
    "[SCENARIO_EXAMPLE]",
    "[ROLES]",
    "[WAYPOINTS]",
    "[ACTIONS]",
    "[PLANNING_GOAL]",
    "[TACTICS_SENTENCE]",
)

TACTICS_SENTENCE = "Your attitude is to perform the following tactics [TACTICS]"


@dataclass(frozen=True)
class CoachOutput:
    scenario: Scenario
    advice: str


def load_template(name: str) -> str:
    return resources.files("coachplan.data.templates").joinpath(name).read_text()


def describe_roles(domain: Domain) -> str:
    lines = []
    for role in domain.roles.values():
        actions = " and ".join(sorted(role.allowed_actions))
        lines.append(
            f"- {role.name}: {role.description} "
            f"Allowed actions: {actions}."
        )
    return "\n".join(lines)


def describe_waypoints(domain: Domain) -> str:
    return "\n".join(
        f"{w.token}: {w.description}" for w in domain.waypoints.values()
    )


def _fill(template: str, slots: dict, required=None) -> str:
    text = template
    for slot, value in slots.items():
        text = text.replace(slot, value)
    for slot in required or slots:
        if slot in text:
            raise UnresolvedPlaceholder(f"unfilled template slot {slot}")
    return text


def build_coach_prompt(domain: Domain, retrieved_actions, goal, tactics,
                       example_output: str = DEFAULT_SCENARIO_EXAMPLE,
                       image_ref: str | None = None) -> ChatRequest:
    if not retrieved_actions:
        raise UnresolvedPlaceholder("no retrieved actions to fill [ACTIONS]")
    if tactics.text.strip():
        tactics_sentence = TACTICS_SENTENCE.replace("[TACTICS]", tactics.text.strip())
    else:
        tactics_sentence = ""
    slots = {
        "[SCENARIO_EXAMPLE]": example_output,
        "[ROLES]": describe_roles(domain),
        "[WAYPOINTS]": describe_waypoints(domain),
        "[ACTIONS]": ", ".join(s.action_id for s in retrieved_actions),
        "[PLANNING_GOAL]": goal.text,
        "[TACTICS_SENTENCE]": tactics_sentence,
    }
    user_text = _fill(load_template("coach.txt"), slots, required=_COACH_SLOTS)
    # Drop the blank line left behind when the tactics sentence is omitted.
    user_text = re.sub(r"\n{3,}", "\n\n", user_text.replace("\n\n\n", "\n\n"))
    return ChatRequest(system_text=SYSTEM_TEXT, user_text=user_text,
                       image_ref=image_ref)


_ASSIGNMENT_RE = re.compile(r"(\S+)\s+is\s+at\s+(\w+)\s*\.?\s*$")
_HEADER_RE = re.compile(r"[A-Z][A-Z ]*:\s*$")


def parse_scenario_block(response_text: str, domain: Domain) -> Scenario:
    """Extract the SCENARIO block: lines between `SCENARIO:` and the next
    blank line or section header, each `<SUBJECT> is at <WAYPOINT>`."""
    lines = response_text.splitlines()
    try:
        start = next(
            i for i, ln in enumerate(lines) if ln.strip().startswith("SCENARIO:")
        )
    except StopIteration:
        raise MissingScenarioBlock("response has no SCENARIO: header") from None
    assignments = []
    seen = set()
    for raw in lines[start + 1:]:
        line = raw.strip()
        if not line or _HEADER_RE.match(line):
            break
        m = _ASSIGNMENT_RE.match(line)
        if not m:
            raise MissingScenarioBlock(f"unparseable scenario line: {raw!r}")
        subject, token = m.groups()
        if subject != BALL and subject not in domain.roles and not re.fullmatch(
            r"OPPONENT_\d+", subject
        ):
            raise UnknownSubject(subject)
        if token not in domain.waypoints:
            raise UnknownWaypoint(token)
        if subject in seen:
            raise DuplicateSubject(subject)
        seen.add(subject)
        assignments.append((subject, token))
    if not assignments:
        raise MissingScenarioBlock("SCENARIO block is empty")
    return Scenario(tuple(assignments))


def parse_advice_block(response_text: str) -> str:
    idx = response_text.find(ADVICE_HEADER)
    if idx < 0:
        raise MissingAdviceBlock(f"response has no {ADVICE_HEADER!r} header")
    return response_text[idx + len(ADVICE_HEADER):].strip()


def retrieve_roles(world: WorldState, scenario: Scenario, domain: Domain) -> dict:
    """Map each own agent to a scenario role by minimum-cost one-to-one
    matching (cost: Euclidean distance agent -> role's assigned waypoint)."""
    own = sorted(
        (agent_id, pose)
        for agent_id, (pose, agent) in world.agents.items()
        if agent.team == OWN
    )
    role_slots = [
        (subject, domain.waypoint(token).position)
        for subject, token in scenario.assignments
        if subject in domain.roles
    ]
    if len(own) != len(role_slots):
        raise CardinalityMismatch(
            f"{len(own)} own agents vs {len(role_slots)} scenario roles"
        )
    cost = np.array(
        [
            [
                float(np.hypot(pose.x - wx, pose.y - wy))
                for _, (wx, wy) in role_slots
            ]
            for _, pose in own
        ]
    )
    rows, cols = linear_sum_assignment(cost)
    return {own[r][0]: role_slots[c][0] for r, c in zip(rows, cols)}
