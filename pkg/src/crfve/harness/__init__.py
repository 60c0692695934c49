"""Experiment drivers, JSON configs, preset geometries and the command line."""

from .config import (CoefficientSpec, ExperimentConfig, SolverConfig, config_from_dict,
                     load_config, preset_geometry)
