"""On-device multi-agent health assistant.

Core pieces: a trajectory data model shared by the runtime and the data
factory, a schema-validated tool world, the planner/caller session loop,
a health manager (vitals, reminders, reports), persistent user memory,
synthetic training-data generation, a metric suite, and a FastAPI gateway
tying it all together.
"""

__version__ = "0.1.0"
