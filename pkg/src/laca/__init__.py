"""Link-quality-aware channel/slot allocation for deadline-driven TDMA sensor networks."""
from .allocator import (AllocParams, InfeasibilityReport, InsufficientSlots, Schedule,
                        allocate_laca, allocate_urgent_first, assign_backups, verify_schedule)
from .linkquality import QualityMap, estimate_quality_map
from .model import Instance, LinkSpec, PathSpec, build_conflict_graph, priority_order, validate_instance
from .oracle import exact_path_pdr, exhaustive_feasible
from .simulator import GeneratorConfig, SimParams, generate_instance, resource_utilization, simulate

__version__ = "0.1.0"
