"""Channel-estimation testbed for IRS-aided mmWave MIMO with semi-passive sensors."""

__version__ = "0.1.0"

from .arrays import (ArrayGeometry, SteeringDictionary, build_dictionaries,
                     steering_ula, steering_upa)
from .channel import (ChannelSet, LinkParams, LinkSpec, ScenarioConfig,
                      cascaded_channel, draw_link, draw_scenario, path_loss_db)
from .estimator import (EstimateSet, HyperParams, InferenceProblem, NoiseModel,
                        PartitionSpec, PosteriorState, StopRule, free_energy,
                        init_posterior, run)
from .estimators import (OmpCascadedBaseline, RidgeCascadedBaseline,
                         VisblChannelEstimator)
from .measurement import (MeasurementSet, Quantizer, TrainingProtocol,
                          TrainingSetup, build_training, design_quantizer,
                          quantize, simulate)
from .metrics import (MetricRecord, PowerModel, energy_efficiency, nmse,
                      nmse_db, power_total, sum_spectral_efficiency)
from .truncated_gaussian import trunc_gauss_moments

__all__ = [
    "ArrayGeometry", "SteeringDictionary", "build_dictionaries",
    "steering_ula", "steering_upa",
    "ChannelSet", "LinkParams", "LinkSpec", "ScenarioConfig",
    "cascaded_channel", "draw_link", "draw_scenario", "path_loss_db",
    "EstimateSet", "HyperParams", "InferenceProblem", "NoiseModel",
    "PartitionSpec", "PosteriorState", "StopRule", "free_energy",
    "init_posterior", "run",
    "OmpCascadedBaseline", "RidgeCascadedBaseline", "VisblChannelEstimator",
    "MeasurementSet", "Quantizer", "TrainingProtocol", "TrainingSetup",
    "build_training", "design_quantizer", "quantize", "simulate",
    "MetricRecord", "PowerModel", "energy_efficiency", "nmse", "nmse_db",
    "power_total", "sum_spectral_efficiency",
    "trunc_gauss_moments",
    "__version__",
]
