"""uavfleet: spare-fleet sizing and Monte Carlo mission simulation for UAV inspection."""

__version__ = "0.1.0"

from .scenario import ScenarioConfig, DerivedMission, derive_mission, load_scenario  # noqa: F401
from .sizing import Rule, FleetPlan, size_fleet, size_all, erlang_b_blocking  # noqa: F401
