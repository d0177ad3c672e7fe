#!/usr/bin/env python3
"""
Sample ring scenarios for testing and demonstration
"""

from typing import List, Dict, Any, Optional
from dataclasses import dataclass

TAU_C = 1.0 / 0.3

@dataclass
class RingScenario:
    name: str
    description: str
    N: int
    branch: int
    kind: str  # "stationary", "traveling", "rotating"
    tau: float
    expected_verdict: str  # "stable", "unstable"
    t_end: float = 2000.0
    perturb_mode: Optional[int] = None

# Sample ring scenarios
SAMPLE_RINGS = [
    RingScenario(
        name="Stable Triangle",
        description="Three spots at the first binding radius below the drift bifurcation",
        N=3, branch=1, kind="stationary", tau=0.1,
        expected_verdict="stable"
    ),

    RingScenario(
        name="Unstable Square",
        description="Four spots at the first binding radius; the mode-2 deformation grows",
        N=4, branch=1, kind="stationary", tau=0.1,
        expected_verdict="unstable",
        perturb_mode=2
    ),

    RingScenario(
        name="Wide Hexagon",
        description="Six spots at the second binding radius",
        N=6, branch=2, kind="stationary", tau=0.1,
        expected_verdict="stable"
    ),

    RingScenario(
        name="Traveling Pentagon",
        description="Five spots drifting together just above the bifurcation",
        N=5, branch=2, kind="traveling", tau=TAU_C + 0.01,
        expected_verdict="unstable"
    ),

    RingScenario(
        name="Rotating Triangle",
        description="Three spots at the second binding radius rotating about their centre",
        N=3, branch=2, kind="rotating", tau=TAU_C + 0.01,
        expected_verdict="stable"
    )
]

def get_ring_by_name(name: str) -> RingScenario:
    """Get a specific ring scenario by name"""
    for ring in SAMPLE_RINGS:
        if ring.name == name:
            return ring
    raise ValueError(f"Ring scenario '{name}' not found")

def get_all_rings() -> List[RingScenario]:
    """Get all available ring scenarios"""
    return SAMPLE_RINGS

def get_rings_by_kind(kind: str) -> List[RingScenario]:
    """Get scenarios filtered by ring kind"""
    return [r for r in SAMPLE_RINGS if r.kind == kind]

def convert_to_api_format(ring: RingScenario) -> Dict[str, Any]:
    """Convert ring scenario to API request format"""
    return {
        "N": ring.N,
        "branch": ring.branch,
        "kind": ring.kind,
        "tau": ring.tau
    }

if __name__ == "__main__":
    # Print all available scenarios
    print("Available Ring Scenarios:")
    print("=" * 50)

    for i, ring in enumerate(SAMPLE_RINGS, 1):
        print(f"{i}. {ring.name}")
        print(f"   Description: {ring.description}")
        print(f"   Spots: {ring.N} (branch {ring.branch}, {ring.kind})")
        print(f"   tau: {ring.tau:.4f}")
        print(f"   Expected: {ring.expected_verdict}")
        print()
