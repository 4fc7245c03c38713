"""Planning domain: waypoints, roles, agents, world state and scenarios.

The field is discretized into named waypoints; scenarios assign roles and
the ball to waypoints.  All types are immutable values, all operations pure.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .errors import EmptyDomain, MissingRole, ParseError, UnknownWaypoint

# SPL field, origin at center: 9.0 m x 6.0 m, own goal at x = -4.5.
FIELD_X = 4.5
FIELD_Y = 3.0

# Cost added per subject present in only one of two scenarios (half the
# field width, so role mismatches dominate small positional drifts).
UNMATCHED_PENALTY = 3.0

TOKEN_RE = re.compile(r"[A-Z][A-Z0-9_]*$")

OWN = "OWN"
OPPONENT = "OPPONENT"
BALL = "BALL"


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    theta = math.fmod(theta, 2.0 * math.pi)
    if theta <= -math.pi:
        theta += 2.0 * math.pi
    elif theta > math.pi:
        theta -= 2.0 * math.pi
    return theta


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("pose coordinates must be finite")
        object.__setattr__(self, "theta", normalize_angle(self.theta))


@dataclass(frozen=True)
class Waypoint:
    token: str
    description: str
    position: tuple[float, float]

    def __post_init__(self):
        if not TOKEN_RE.match(self.token):
            raise ValueError(f"bad waypoint token: {self.token!r}")


@dataclass(frozen=True)
class Role:
    name: str
    description: str
    allowed_actions: frozenset[str]

    def __post_init__(self):
        if not self.allowed_actions:
            raise ValueError(f"role {self.name} has no allowed actions")


@dataclass(frozen=True)
class Agent:
    agent_id: str
    team: str  # OWN | OPPONENT
    role: str | None = None


@dataclass(frozen=True)
class WorldState:
    agents: dict  # agent_id -> (Pose, Agent)
    ball: tuple[float, float]
    timestamp: float = 0.0


@dataclass(frozen=True)
class Scenario:
    """Ordered (subject, waypoint-token) assignments; subject is a role
    name, an OPPONENT_i marker, or BALL."""

    assignments: tuple  # of (subject, token)

    def subjects(self):
        return [s for s, _ in self.assignments]

    def waypoint_of(self, subject):
        for s, t in self.assignments:
            if s == subject:
                return t
        return None


@dataclass(frozen=True)
class PlanningGoal:
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("planning goal must be non-empty")


@dataclass(frozen=True)
class Tactics:
    text: str = ""


@dataclass(frozen=True)
class Domain:
    waypoints: dict  # token -> Waypoint, insertion ordered
    roles: dict      # name -> Role, insertion ordered

    def waypoint(self, token: str) -> Waypoint:
        try:
            return self.waypoints[token]
        except KeyError:
            raise UnknownWaypoint(token) from None


def nearest_waypoint(pos: tuple[float, float], domain: Domain) -> str:
    """Token of the waypoint closest to pos; ties broken lexicographically."""
    if not domain.waypoints:
        raise EmptyDomain("no waypoints in domain")
    best = None
    best_d = None
    for token in sorted(domain.waypoints):
        wx, wy = domain.waypoints[token].position
        d = math.hypot(pos[0] - wx, pos[1] - wy)
        if best_d is None or d < best_d:
            best, best_d = token, d
    return best


def opponent_markers(world: WorldState):
    """Opponent agents labeled OPPONENT_1..N in field order (x, then y,
    then agent id)."""
    opponents = [
        (pose, agent)
        for pose, agent in world.agents.values()
        if agent.team == OPPONENT
    ]
    opponents.sort(key=lambda pa: (pa[0].x, pa[0].y, pa[1].agent_id))
    return [
        (f"OPPONENT_{i + 1}", pose) for i, (pose, agent) in enumerate(opponents)
    ]


def scenario_from_world(world: WorldState, domain: Domain) -> Scenario:
    """Discretize a world state into a scenario: own roles first (in domain
    role order), then opponent markers, then BALL."""
    if not domain.waypoints:
        raise EmptyDomain("no waypoints in domain")
    by_role = {}
    for pose, agent in world.agents.values():
        if agent.team != OWN:
            continue
        if agent.role is None:
            raise MissingRole(f"own agent {agent.agent_id} has no role")
        by_role[agent.role] = pose
    assignments = []
    for name in domain.roles:
        if name in by_role:
            pose = by_role[name]
            assignments.append((name, nearest_waypoint((pose.x, pose.y), domain)))
    for marker, pose in opponent_markers(world):
        assignments.append((marker, nearest_waypoint((pose.x, pose.y), domain)))
    assignments.append((BALL, nearest_waypoint(world.ball, domain)))
    return Scenario(tuple(assignments))


def scenario_distance(a: Scenario, b: Scenario, domain: Domain) -> float:
    """Sum of waypoint distances over shared subjects plus a fixed penalty
    per unmatched subject.  Symmetric; not a metric (no triangle inequality)."""
    pos_a = {s: domain.waypoint(t).position for s, t in a.assignments}
    pos_b = {s: domain.waypoint(t).position for s, t in b.assignments}
    total = 0.0
    for subject, (ax, ay) in pos_a.items():
        if subject in pos_b:
            bx, by = pos_b[subject]
            total += math.hypot(ax - bx, ay - by)
        else:
            total += UNMATCHED_PENALTY
    for subject in pos_b:
        if subject not in pos_a:
            total += UNMATCHED_PENALTY
    return total


def serialize_scenario(scenario: Scenario) -> str:
    lines = ["SCENARIO:"]
    for subject, token in scenario.assignments:
        lines.append(f"{subject} is at {token}")
    return "\n".join(lines)


# --- file formats ----------------------------------------------------------

_WAYPOINT_RE = re.compile(
    r'WAYPOINT\s+([A-Z][A-Z0-9_]*)\s+(-?[\d.]+)\s+(-?[\d.]+)\s+"([^"]*)"\s*$'
)
_ROLE_RE = re.compile(
    r'ROLE\s+([A-Z][A-Z0-9_]*)\s+"([^"]*)"\s+ACTIONS=([\w,]+)\s*$'
)


def parse_domain_file(text: str) -> Domain:
    """Line-oriented domain file: WAYPOINT and ROLE records, # comments."""
    waypoints = {}
    roles = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("WAYPOINT"):
            m = _WAYPOINT_RE.match(line)
            if not m:
                raise ParseError(f"bad WAYPOINT record: {raw!r}", line=lineno)
            token, x, y, desc = m.groups()
            if token in waypoints:
                raise ParseError(f"duplicate waypoint {token}", line=lineno)
            waypoints[token] = Waypoint(token, desc, (float(x), float(y)))
        elif line.startswith("ROLE"):
            m = _ROLE_RE.match(line)
            if not m:
                raise ParseError(f"bad ROLE record: {raw!r}", line=lineno)
            name, desc, actions = m.groups()
            if name in roles:
                raise ParseError(f"duplicate role {name}", line=lineno)
            roles[name] = Role(name, desc, frozenset(actions.split(",")))
        else:
            raise ParseError(f"unknown record: {raw!r}", line=lineno)
    return Domain(waypoints, roles)


def parse_world_file(text: str, domain: Domain) -> WorldState:
    """World-state ingestion format (one line per entity):

    AGENT <id> <OWN|OPPONENT> <role|-> <x> <y> <theta>
    BALL <x> <y>
    """
    agents = {}
    ball = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "AGENT":
            if len(parts) != 7:
                raise ParseError(f"bad AGENT record: {raw!r}", line=lineno)
            _, aid, team, role, x, y, theta = parts
            if team not in (OWN, OPPONENT):
                raise ParseError(f"bad team {team!r}", line=lineno)
            role_name = None if role == "-" else role
            if role_name is not None and role_name not in domain.roles:
                raise ParseError(f"unknown role {role_name}", line=lineno)
            if aid in agents:
                raise ParseError(f"duplicate agent {aid}", line=lineno)
            agents[aid] = (
                Pose(float(x), float(y), float(theta)),
                Agent(aid, team, role_name),
            )
        elif parts[0] == "BALL":
            if len(parts) != 3:
                raise ParseError(f"bad BALL record: {raw!r}", line=lineno)
            ball = (
                max(-FIELD_X, min(FIELD_X, float(parts[1]))),
                max(-FIELD_Y, min(FIELD_Y, float(parts[2]))),
            )
        else:
            raise ParseError(f"unknown record: {raw!r}", line=lineno)
    if ball is None:
        raise ParseError("world file has no BALL record")
    return WorldState(agents, ball)
