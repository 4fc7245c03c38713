"""Deterministic plan execution in a 2D kinematic soccer simulation.

A synchronized plan compiles to one finite-state machine per agent; JOIN
steps become barriers.  The match loop is fixed-timestep, single-threaded
and fully deterministic given (world, config, opponent policy, seed):
point-mass agents, a ball that is held, flying or free, no collision
physics beyond opponent ball-steal contact.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .domain import FIELD_X, FIELD_Y, OWN, Domain, WorldState
from .errors import ConfigInvalid, EmptyInput, InvalidPlan
from .planlang import JOIN, GroundedAction, Plan


@dataclass(frozen=True)
class SimConfig:
    walk_speed: float = 0.25
    pass_speed: float = 2.0
    kick_speed: float = 4.0
    control_radius: float = 0.3
    tick: float = 0.05
    timeout: float = 120.0
    goal_x: float = FIELD_X
    goal_half_width: float = 0.75

    def __post_init__(self):
        values = (self.walk_speed, self.pass_speed, self.kick_speed,
                  self.control_radius, self.tick, self.timeout,
                  self.goal_half_width)
        if any(v <= 0 for v in values):
            raise ConfigInvalid("all simulation parameters must be positive")
        if self.tick > 0.1:
            raise ConfigInvalid("tick must be <= 0.1 s")


@dataclass(frozen=True)
class FSMState:
    action: GroundedAction
    barrier_id: str | None = None


@dataclass
class AgentFSM:
    agent_id: str
    states: tuple  # of FSMState
    current: int = 0


@dataclass(frozen=True)
class MatchResult:
    success: bool
    passes: int
    scoring_time: float | None
    trace: tuple  # of formatted event lines

    def trace_text(self) -> str:
        return "\n".join(self.trace) + "\n"


@dataclass(frozen=True)
class AggregateMetrics:
    success_rate: float
    avg_passes: float
    avg_scoring_time: float | None


def compile_fsm(plan: Plan) -> dict:
    """One FSM per agent, actions in plan order; each JOIN contributes one
    barrier shared by exactly its members.  Agents absent from a step simply
    have no state for it."""
    fsms: dict[str, list] = {}
    for index, step in enumerate(plan.steps, start=1):
        if step.kind == JOIN:
            agents = step.agents()
            if len(set(agents)) != len(agents):
                raise InvalidPlan(f"step {index}: JOIN with duplicate agents")
            barrier = f"barrier_{index}"
        else:
            barrier = None
        for action in step.actions:
            fsms.setdefault(action.agent_id, []).append(FSMState(action, barrier))
    if not fsms:
        raise InvalidPlan("plan has no actions")
    return {aid: AgentFSM(aid, tuple(states)) for aid, states in sorted(fsms.items())}


# --- opponent policies -----------------------------------------------------

STATIC = "STATIC"
NEAREST_INTERCEPT = "NEAREST_INTERCEPT"


def make_opponent_policy(name: str = STATIC, seed: int = 0):
    if name == STATIC:
        return _StaticPolicy()
    if name == NEAREST_INTERCEPT:
        return _InterceptPolicy(seed)
    raise ConfigInvalid(f"unknown opponent policy {name!r}")


class _StaticPolicy:
    name = STATIC
    steals = False

    def move(self, pos, ball, config):
        return pos


class _InterceptPolicy:
    name = NEAREST_INTERCEPT
    steals = True

    def __init__(self, seed):
        self.rng = random.Random(seed)

    def move(self, pos, ball, config):
        return _step_towards(pos, ball, config.walk_speed * config.tick)


# --- match loop ------------------------------------------------------------

def _step_towards(pos, target, step):
    dx, dy = target[0] - pos[0], target[1] - pos[1]
    dist = math.hypot(dx, dy)
    if dist <= step or dist == 0.0:
        return (target[0], target[1])
    return (pos[0] + dx / dist * step, pos[1] + dy / dist * step)


def _clamp(pos):
    return (
        max(-FIELD_X, min(FIELD_X, pos[0])),
        max(-FIELD_Y, min(FIELD_Y, pos[1])),
    )


@dataclass
class _Ball:
    pos: tuple
    mode: str = "FREE"  # FREE | HELD | PASS | KICK
    holder: str | None = None
    receiver: str | None = None
    velocity: tuple = (0.0, 0.0)


class _Match:
    def __init__(self, fsms, world0: WorldState, domain: Domain,
                 config: SimConfig, opponent_policy):
        missing = [aid for aid in fsms if aid not in world0.agents]
        if missing:
            raise ConfigInvalid(f"world is missing plan agents: {missing}")
        self.fsms = fsms
        self.domain = domain
        self.config = config
        self.policy = opponent_policy
        self.own = {}
        self.opponents = {}
        for agent_id, (pose, agent) in sorted(world0.agents.items()):
            if agent.team == OWN:
                self.own[agent_id] = (pose.x, pose.y)
            else:
                self.opponents[agent_id] = (pose.x, pose.y)
        self.ball = _Ball(world0.ball)
        self.barrier_total: dict[str, int] = {}
        self.barrier_done: dict[str, int] = {}
        for fsm in fsms.values():
            for state in fsm.states:
                if state.barrier_id:
                    self.barrier_total[state.barrier_id] = (
                        self.barrier_total.get(state.barrier_id, 0) + 1
                    )
        self.completed: dict[str, set] = {aid: set() for aid in fsms}
        self.launched: set = set()  # (agent_id, state index) pairs
        self.t = 0.0
        self.ticks = 0
        self.trace: list[str] = []
        self.passes = 0
        self.success = False
        self.scoring_time = None
        self._seed_possession()

    def _seed_possession(self):
        best = None
        for aid, pos in sorted(self.own.items()):
            d = math.hypot(pos[0] - self.ball.pos[0], pos[1] - self.ball.pos[1])
            if d <= self.config.control_radius and (best is None or d < best[0]):
                best = (d, aid)
        if best is not None:
            self.ball.mode = "HELD"
            self.ball.holder = best[1]

    def _event(self, kind, agent, details=""):
        line = f"t={self.t:.2f} EVENT {kind} {agent}"
        if details:
            line += f" {details}"
        self.trace.append(line)

    def _waypoint_pos(self, token):
        return self.domain.waypoint(token).position

    def _holds_ball(self, agent_id):
        return self.ball.mode == "HELD" and self.ball.holder == agent_id

    # -- per-action behavior; returns True when the action is finished.
    def _act(self, agent_id, action: GroundedAction, state_idx: int):
        cfg = self.config
        args = dict(action.args)
        aid = action.action_id
        pos = self.own[agent_id]
        if aid in ("move_to", "mark_opponent", "dribble_to", "defend_goal"):
            token = args.get("TARGET", "OUR_GOAL" if aid == "defend_goal" else None)
            target = self._waypoint_pos(token)
            new_pos = _clamp(_step_towards(pos, target, cfg.walk_speed * cfg.tick))
            self.own[agent_id] = new_pos
            if self._holds_ball(agent_id):
                self.ball.pos = new_pos
            return new_pos == tuple(target)
        if aid == "align_to_goal":
            return True
        if aid == "receive_ball":
            if self._holds_ball(agent_id):
                return True
            if self.ball.mode == "FREE":
                self._try_take(agent_id)
            return self._holds_ball(agent_id)
        if "pass" in aid:
            receiver = args.get("RECEIVER")
            if self._holds_ball(agent_id):
                self.ball.mode = "PASS"
                self.ball.holder = None
                self.ball.receiver = receiver
                self.launched.add((agent_id, state_idx))
                self._event("PASS_LAUNCH", agent_id, f"to={receiver}")
                return False
            if self.ball.mode == "PASS" and self.ball.receiver is not None:
                # In flight: the pass completes when the receiver controls it.
                return False
            self._chase_ball(agent_id)
            return False
        if "kick" in aid:
            if self._holds_ball(agent_id):
                goal = (cfg.goal_x, 0.0)
                dx, dy = goal[0] - self.ball.pos[0], goal[1] - self.ball.pos[1]
                dist = math.hypot(dx, dy)
                if dist == 0.0:
                    return True
                self.ball.mode = "KICK"
                self.ball.holder = None
                self.ball.velocity = (dx / dist * cfg.kick_speed,
                                      dy / dist * cfg.kick_speed)
                self.launched.add((agent_id, state_idx))
                self._event("KICK", agent_id)
                return False
            if self.ball.mode == "KICK":
                return False
            self._chase_ball(agent_id)
            return False
        # Unknown action ids execute as instant no-ops.
        return True

    def _chase_ball(self, agent_id):
        cfg = self.config
        pos = self.own[agent_id]
        self.own[agent_id] = _clamp(
            _step_towards(pos, self.ball.pos, cfg.walk_speed * cfg.tick)
        )
        if self.ball.mode == "FREE":
            self._try_take(agent_id)

    def _try_take(self, agent_id):
        pos = self.own[agent_id]
        d = math.hypot(pos[0] - self.ball.pos[0], pos[1] - self.ball.pos[1])
        if d <= self.config.control_radius:
            self.ball.mode = "HELD"
            self.ball.holder = agent_id
            self.ball.pos = pos

    def _update_ball(self):
        cfg = self.config
        ball = self.ball
        if ball.mode == "HELD" and ball.holder in self.own:
            ball.pos = self.own[ball.holder]
            return
        if ball.mode == "HELD" and ball.holder in self.opponents:
            ball.pos = self.opponents[ball.holder]
            return
        if ball.mode == "PASS":
            target = self.own.get(ball.receiver)
            if target is None:
                ball.mode = "FREE"
                return
            ball.pos = _step_towards(ball.pos, target, cfg.pass_speed * cfg.tick)
            d = math.hypot(ball.pos[0] - target[0], ball.pos[1] - target[1])
            if d <= cfg.control_radius:
                ball.mode = "HELD"
                ball.holder = ball.receiver
                ball.receiver = None
                ball.pos = target
                self.passes += 1
                self._event("PASS_COMPLETE", ball.holder, f"passes={self.passes}")
            return
        if ball.mode == "KICK":
            new_pos = (ball.pos[0] + ball.velocity[0] * cfg.tick,
                       ball.pos[1] + ball.velocity[1] * cfg.tick)
            if (new_pos[0] >= cfg.goal_x
                    and abs(new_pos[1]) <= cfg.goal_half_width):
                ball.pos = _clamp(new_pos)
                ball.mode = "FREE"
                ball.velocity = (0.0, 0.0)
                self.success = True
                self.scoring_time = self.t
                self._event("GOAL", "BALL",
                            f"x={ball.pos[0]:.3f} y={ball.pos[1]:.3f}")
                return
            clamped = _clamp(new_pos)
            if clamped != new_pos:
                ball.pos = clamped
                ball.mode = "FREE"
                ball.velocity = (0.0, 0.0)
                self._event("BALL_STOPPED", "BALL",
                            f"x={ball.pos[0]:.3f} y={ball.pos[1]:.3f}")
            else:
                ball.pos = new_pos

    def _move_opponents(self):
        for oid in sorted(self.opponents):
            self.opponents[oid] = _clamp(
                self.policy.move(self.opponents[oid], self.ball.pos, self.config)
            )
            if self.policy.steals and self.ball.mode in ("FREE", "PASS", "KICK"):
                pos = self.opponents[oid]
                d = math.hypot(pos[0] - self.ball.pos[0], pos[1] - self.ball.pos[1])
                if d <= self.config.control_radius:
                    self.ball.mode = "HELD"
                    self.ball.holder = oid
                    self.ball.receiver = None
                    self.ball.velocity = (0.0, 0.0)
                    self.ball.pos = pos
                    self._event("STEAL", oid)

    def _current_state(self, fsm: AgentFSM):
        if fsm.current >= len(fsm.states):
            return None
        return fsm.states[fsm.current]

    def _advance(self, fsm: AgentFSM):
        """Move past completed states whose barriers (if any) have released."""
        while fsm.current < len(fsm.states):
            state = fsm.states[fsm.current]
            key = fsm.current
            if key not in self.completed[fsm.agent_id]:
                return
            if state.barrier_id is not None:
                done = self.barrier_done.get(state.barrier_id, 0)
                if done < self.barrier_total[state.barrier_id]:
                    return  # hold at the barrier
            fsm.current += 1

    def run(self) -> MatchResult:
        cfg = self.config
        plan_live = True
        while True:
            self.ticks += 1
            self.t = self.ticks * cfg.tick
            if self.t > cfg.timeout:
                self.t = round(cfg.timeout, 10)
                self._event("TIMEOUT", "MATCH")
                break
            for aid in sorted(self.fsms):
                fsm = self.fsms[aid]
                self._advance(fsm)
                state = self._current_state(fsm)
                if state is None or fsm.current in self.completed[aid]:
                    continue
                finished = self._act(aid, state.action, fsm.current)
                if finished:
                    self._finish(fsm, state)
            self._move_opponents()
            self._update_ball()
            self._settle_flights()
            if self.success:
                break
            plan_live = any(
                self._incomplete(self.fsms[aid]) for aid in self.fsms
            )
            if not plan_live and self.ball.mode not in ("PASS", "KICK"):
                self._event("PLAN_DONE", "MATCH")
                break
        return MatchResult(
            success=self.success,
            passes=self.passes,
            scoring_time=self.scoring_time,
            trace=tuple(self.trace),
        )

    def _incomplete(self, fsm: AgentFSM):
        self._advance(fsm)
        return fsm.current < len(fsm.states)

    def _settle_flights(self):
        """Complete pass/kick actions whose ball flight has resolved."""
        for aid in sorted(self.fsms):
            fsm = self.fsms[aid]
            state = self._current_state(fsm)
            if state is None or fsm.current in self.completed[aid]:
                continue
            if (aid, fsm.current) not in self.launched:
                continue
            action_id = state.action.action_id
            if "pass" in action_id and "receive" not in action_id:
                receiver = dict(state.action.args).get("RECEIVER")
                if self.ball.mode == "HELD" and self.ball.holder == receiver:
                    self._finish(fsm, state)
            elif "kick" in action_id:
                if self.success or (
                    self.ball.mode == "FREE"
                    and self.ball.velocity == (0.0, 0.0)
                ):
                    self._finish(fsm, state)

    def _finish(self, fsm: AgentFSM, state: FSMState):
        self.completed[fsm.agent_id].add(fsm.current)
        self._event("ACTION_DONE", fsm.agent_id, state.action.action_id)
        if state.barrier_id is not None:
            self.barrier_done[state.barrier_id] = (
                self.barrier_done.get(state.barrier_id, 0) + 1
            )


def run_match(fsms, world0: WorldState, domain: Domain, config: SimConfig,
              opponent_policy=None) -> MatchResult:
    if opponent_policy is None:
        opponent_policy = make_opponent_policy(STATIC)
    return _Match(fsms, world0, domain, config, opponent_policy).run()


def aggregate(results) -> AggregateMetrics:
    results = list(results)
    if not results:
        raise EmptyInput("no match results to aggregate")
    successes = [r for r in results if r.success]
    avg_time = (
        sum(r.scoring_time for r in successes) / len(successes)
        if successes
        else None
    )
    return AggregateMetrics(
        success_rate=len(successes) / len(results),
        avg_passes=sum(r.passes for r in results) / len(results),
        avg_scoring_time=avg_time,
    )


def format_metrics_table(metrics: AggregateMetrics) -> str:
    time_cell = (
        f"{metrics.avg_scoring_time:.1f} sec."
        if metrics.avg_scoring_time is not None
        else "n/a"
    )
    rows = [
        ("Success Rate", f"{metrics.success_rate * 100:.0f}%"),
        ("Avg. no. of passes", f"{metrics.avg_passes:.2f}"),
        ("Avg. scoring time", time_cell),
    ]
    width = max(len(label) for label, _ in rows)
    lines = [f"{label:<{width}} | {value}" for label, value in rows]
    return "\n".join(lines) + "\n"


def format_metrics_delimited(metrics: AggregateMetrics, sep: str = "\t") -> str:
    time_cell = (
        f"{metrics.avg_scoring_time:.6g}"
        if metrics.avg_scoring_time is not None
        else ""
    )
    return (
        sep.join(["success_rate", "avg_passes", "avg_scoring_time"]) + "\n"
        + sep.join([f"{metrics.success_rate:.6g}", f"{metrics.avg_passes:.6g}", time_cell])
        + "\n"
    )
