import numpy as np
import pytest

from rbnoise.core.noise import Channel, Correlation, NoiseSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def small_study() -> dict:
    """Two tiny runs on shared sequences, fast enough for every CLI test."""
    return {
        "name": "tiny",
        "seed": 7,
        "defaults": {"sequences": 4, "length": 6, "realizations": 5},
        "runs": [
            {
                "label": "correlated",
                "noise": [{"channel": "detuning", "correlation": "full", "rms2": 2e-3}],
            },
            {
                "label": "uncorrelated",
                "noise": [
                    {"channel": "detuning", "correlation": "block", "block_gates": 1, "rms2": 2e-3}
                ],
            },
        ],
        "analysis": {"reorderings": 20},
    }


@pytest.fixture
def full_detuning() -> NoiseSpec:
    return NoiseSpec(Channel.DETUNING, Correlation.FULL, rms2=2e-3)
