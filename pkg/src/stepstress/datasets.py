"""Bundled example data."""

from __future__ import annotations

from importlib import resources

from .estimation import CountData
from .io import load_dataset, load_scenario
from .model import StepStressDesign
from .simulation import SimulationScenario

__all__ = ["solar_device", "solar_device_path", "mc_scenario", "mc_scenario_path"]


def _data_path(name: str):
    return resources.files("stepstress").joinpath("data", name)


def solar_device_path(variant: str = "it300") -> str:
    """Path to a bundled solar-lighting-device dataset file.

    Two variants ship because the source's narrative and data table disagree
    on the second inspection time (400h vs 300h); ``it300`` follows the data
    table and is the default used everywhere in this package.
    """
    if variant not in ("it300", "it400"):
        raise ValueError("variant must be 'it300' or 'it400'")
    return str(_data_path(f"solar_device_{variant}.txt"))


def solar_device(variant: str = "it300") -> tuple[StepStressDesign, CountData]:
    """Interval-monitored solar lighting device data (times in hundreds of hours)."""
    return load_dataset(solar_device_path(variant))


def mc_scenario_path() -> str:
    return str(_data_path("mc_scenario.txt"))


def mc_scenario() -> SimulationScenario:
    """The bundled two-risk Monte Carlo scenario (30% contamination variant)."""
    return load_scenario(mc_scenario_path())
