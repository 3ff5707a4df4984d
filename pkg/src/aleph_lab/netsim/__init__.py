"""Deterministic asynchronous network simulator."""

from .byzantine import BEHAVIOURS, CrashedNode, Equivocator, Forker, GarbageDealer, ShareWithholder, node_class
from .forkbomb import BombMember, Coalition, bomb_units, build_fork_bomb
from .messages import GossipMsg, ParentRequest, TossShareMsg, UnitMsg, msg_kind
from .node import MAIN_CHANNEL, Genesis, Node
from .rng import derive_rng, derive_seed
from .scenario import Run, Scenario, build_world, make_genesis, make_scheduler, run_scenario
from .schedulers import SCHEDULERS, AdversarialDelay, Crash, FairRandom, Scheduler, Synchronous
from .world import AsyncRoundTracker, BudgetExhausted, HarnessFault, Message, SimWorld, recompute_async_rounds
