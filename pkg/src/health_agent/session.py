"""The planner and caller loop that drives one assistant episode.

A session starts from a user query (or resumes a suspended trajectory),
alternates planner decisions with caller tool calls against a simulated
world, and stops when the planner ends the task, the world asks the user
a question, the step budget runs out, or the episode fails.
"""

from __future__ import annotations

from dataclasses import dataclass

from .policies import PolicyBackend, PolicyError
from .prompts import ContextOverflow, build_prompt
from .tools import ToolRegistry, load_default_registry, validate_call
from .trajectory import (
    ToolCall,
    Trajectory,
    TrajectoryError,
    UserDetails,
    caller_state,
    observation_state,
    parse_caller_output,
    parse_planner_output,
    planner_state,
    system_state,
    user_state,
)
from .world import (DEFAULT_EMERGENCY_CONTACT, DEFAULT_LOCATION, InvalidCall,
                    SuspendedAwaitingUser, UnknownTool, WorldState, execute)

COMPLETE = "complete"
AWAITING_USER = "awaiting_user"
FAILED = "failed"
EXHAUSTED = "exhausted"

# an episode that cannot recover within this many planner turns is broken
MAX_CONSECUTIVE_ERRORS = 2


@dataclass
class SessionOutcome:
    trajectory: Trajectory
    status: str
    pending_question: str | None = None
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.status in (COMPLETE, AWAITING_USER)


def _complete_with_retries(policy: PolicyBackend, prompt: str, role: str,
                           parser, retries: int):
    last = None
    for _attempt in range(retries + 1):
        raw = policy.complete(prompt, role)
        try:
            return parser(raw)
        except TrajectoryError as exc:
            last = exc
    raise PolicyError(f"{role} output stayed unparseable: {last}")


def _execute_call(trajectory: Trajectory, call: ToolCall, world: WorldState,
                  user_id: str, registry: ToolRegistry):
    """Run one already-appended caller state; observation or suspension."""
    result = execute(call, world, user_id, registry)
    trajectory.states.append(observation_state(result))
    return result


def run_session(query: str | None = None,
                user_details: UserDetails | None = None,
                world: WorldState | None = None,
                planner: PolicyBackend | None = None,
                caller: PolicyBackend | None = None,
                registry: ToolRegistry | None = None,
                step_budget: int = 20,
                parse_retries: int = 2,
                trajectory: Trajectory | None = None) -> SessionOutcome:
    """Drive one episode to an outcome.

    Pass ``trajectory`` to resume a suspended episode: queue the user's
    answer on ``world.user_responses`` first, and the pending call runs
    before the planner is consulted again. ``caller`` defaults to the
    planner backend serving both roles.
    """
    if world is None or planner is None:
        raise ValueError("a world and a planner policy are required")
    caller = caller or planner
    registry = registry or load_default_registry()

    if trajectory is None:
        if query is None or user_details is None:
            raise ValueError("a new session needs a query and user details")
        trajectory = Trajectory([system_state(user_details), user_state(query)])
        if user_details.user_id not in world.users:
            user = user_details.to_dict()
            # SOS needs a reachable contact and a device location fix
            user.setdefault("emergency_contacts", [DEFAULT_EMERGENCY_CONTACT])
            user.setdefault("location", dict(DEFAULT_LOCATION))
            world.add_user(user)
    user_id = trajectory.user_details.user_id

    errors = 0
    try:
        # a trailing caller state is a call suspended mid-execution
        if trajectory.states and trajectory.states[-1].kind == "caller":
            pending = trajectory.states[-1].payload
            try:
                _execute_call(trajectory, pending, world, user_id, registry)
            except SuspendedAwaitingUser as exc:
                return SessionOutcome(trajectory, AWAITING_USER,
                                      pending_question=exc.question)
            except (UnknownTool, InvalidCall) as exc:
                trajectory.states.append(observation_state({"error": str(exc)}))
                errors += 1

        for _turn in range(step_budget):
            prompt = build_prompt("planner", trajectory, registry)
            step = _complete_with_retries(planner, prompt, "planner",
                                          parse_planner_output, parse_retries)
            trajectory.states.append(planner_state(step.reason, step.action))
            if step.terminal:
                return SessionOutcome(trajectory, COMPLETE)

            prompt = build_prompt("caller", trajectory, registry)
            call = _complete_with_retries(caller, prompt, "caller",
                                          parse_caller_output, parse_retries)
            report = validate_call(call, registry)
            if not report.ok:
                corrective = (f"{prompt}\n\n[correction]\n{report.describe()}\n"
                              "Reply again with a valid call.")
                try:
                    retry = parse_caller_output(caller.complete(corrective, "caller"))
                except TrajectoryError:
                    retry = None
                if retry is not None and validate_call(retry, registry).ok:
                    call = retry

            trajectory.states.append(caller_state(call.tool, call.parameters))
            try:
                _execute_call(trajectory, call, world, user_id, registry)
            except SuspendedAwaitingUser as exc:
                return SessionOutcome(trajectory, AWAITING_USER,
                                      pending_question=exc.question)
            except (UnknownTool, InvalidCall) as exc:
                trajectory.states.append(observation_state({"error": str(exc)}))
                errors += 1
                if errors >= MAX_CONSECUTIVE_ERRORS:
                    return SessionOutcome(trajectory, FAILED,
                                          failure=f"gave up after repeated "
                                                  f"tool errors: {exc}")
                continue
            errors = 0
    except ContextOverflow as exc:
        return SessionOutcome(trajectory, FAILED, failure=str(exc))
    except PolicyError as exc:
        return SessionOutcome(trajectory, FAILED, failure=str(exc))

    return SessionOutcome(trajectory, EXHAUSTED,
                          failure=f"no terminal action within "
                                  f"{step_budget} steps")


def resume_session(trajectory: Trajectory, answer, world: WorldState,
                   planner: PolicyBackend, **kwargs) -> SessionOutcome:
    """Feed the user's answer to a suspended episode and keep going."""
    world.user_responses.append(answer)
    world.pending_question = None
    return run_session(world=world, planner=planner, trajectory=trajectory,
                       **kwargs)
