from __future__ import annotations

import pytest

from tribound.simproc import MemoryConfig, ProcessorConfig

UNIT_LATENCY = {
    "alu": 1,
    "move": 1,
    "compare": 1,
    "branch_cond": 1,
    "branch_uncond": 1,
    "return_": 1,
}


@pytest.fixture
def unit_proc() -> ProcessorConfig:
    """Everything costs one cycle, memory always hits, no coupling effects."""
    return ProcessorConfig("unit", UNIT_LATENCY, memory=MemoryConfig(1, 1, 64, 16))


@pytest.fixture
def flat_proc() -> ProcessorConfig:
    """Additive config: no hazards, hit/miss memory decided by address only."""
    return ProcessorConfig(
        "flat",
        UNIT_LATENCY,
        branch_taken_penalty=2,
        memory=MemoryConfig(1, 10, 64, 16),
        cross_boundary_effects=False,
    )


@pytest.fixture
def coupled_proc() -> ProcessorConfig:
    """Hazard-coupled config with boundary pessimism on isolated sequences."""
    return ProcessorConfig(
        "coupled",
        UNIT_LATENCY,
        raw_hazard_penalty=2,
        branch_taken_penalty=3,
        memory=MemoryConfig(1, 10, 64, 16),
        cross_boundary_effects=True,
    )
