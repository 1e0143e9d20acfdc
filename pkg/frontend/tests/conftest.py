from pathlib import Path

import pytest

from synth import format_convergence, format_sweep, synthetic_convergence


@pytest.fixture
def conv_csv(tmp_path) -> Path:
    path = tmp_path / "convergence.csv"
    path.write_text(format_convergence(synthetic_convergence()))
    return path


@pytest.fixture
def drifting_conv_csv(tmp_path) -> Path:
    path = tmp_path / "convergence.csv"
    path.write_text(format_convergence(synthetic_convergence(drift=0.15)))
    return path


@pytest.fixture
def sweep_csv(tmp_path) -> Path:
    series = {a: [(0.5 * k, 0.1 * k * (1.0 + a)) for k in range(6)]
              for a in (-0.125, 0.0, 0.125, 0.25)}
    path = tmp_path / "sweep_amplitude.csv"
    path.write_text(format_sweep(series))
    return path
