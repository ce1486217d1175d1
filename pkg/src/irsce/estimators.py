"""Estimator classes with the scikit-learn parameter/fit conventions.

Each estimator takes its algorithm knobs in the constructor (so get_params/
set_params/clone compose with the wider ecosystem) and consumes one
measurement instance through fit(measurements, protocol=..., dictionary=...,
noise_var=...). Fitted results live in trailing-underscore attributes, with
``estimates_`` holding the EstimateSet every downstream consumer uses.
"""

import numpy as np
from sklearn.base import BaseEstimator

from . import baselines
from .estimator import HyperParams, NoiseModel, PartitionSpec, StopRule, run
from .measurement import MeasurementSet


def _check_inputs(measurements, protocol, dictionary):
    if not isinstance(measurements, MeasurementSet):
        raise TypeError("measurements must be a MeasurementSet")
    if protocol is None or dictionary is None:
        raise ValueError("protocol and dictionary are required fit parameters")
    if measurements.y.shape[1] != protocol.x.shape[1]:
        raise ValueError("measurements and protocol disagree on the slot count")


class VisblChannelEstimator(BaseEstimator):
    """Variational-inference SBL estimator of all three links.

    Parameters mirror the inference knobs: Gamma hyperpriors (a, b), block
    counts (s_f, s_g, s_h), the stop rule and the warm-start cycle count.
    """

    uses_sensors = True

    def __init__(self, a=1e-6, b=1e-6, s_f=1, s_g=1, s_h=1, max_iters=200,
                 rel_tol=1e-4, init_iters=20, track_free_energy=False):
        self.a = a
        self.b = b
        self.s_f = s_f
        self.s_g = s_g
        self.s_h = s_h
        self.max_iters = max_iters
        self.rel_tol = rel_tol
        self.init_iters = init_iters
        self.track_free_energy = track_free_energy

    def fit(self, measurements, protocol=None, dictionary=None, noise_var=None):
        _check_inputs(measurements, protocol, dictionary)
        if noise_var is None:
            raise ValueError("noise_var is a required fit parameter")
        if np.isscalar(noise_var):
            noise = NoiseModel(float(noise_var), float(noise_var))
        else:
            noise = NoiseModel(*noise_var)
        estimates, trace = run(
            measurements, protocol, dictionary,
            hyper=HyperParams(self.a, self.b),
            partition=PartitionSpec(self.s_f, self.s_g, self.s_h),
            noise=noise, stop=StopRule(self.max_iters, self.rel_tol),
            init_iters=self.init_iters,
            track_free_energy=self.track_free_energy)
        self.estimates_ = estimates
        self.trace_ = trace
        self.f_bar_hat_ = estimates.f_bar
        self.g_bar_hat_ = estimates.g_bar
        self.h_bar_hat_ = estimates.h_bar
        self.cascaded_hat_ = estimates.cascaded
        return self


class OmpCascadedBaseline(BaseEstimator):
    """Greedy sparse recovery of the cascaded + direct links from Y alone."""

    uses_sensors = False

    def __init__(self, sparsity=120):
        self.sparsity = sparsity

    def fit(self, measurements, protocol=None, dictionary=None, noise_var=None):
        _check_inputs(measurements, protocol, dictionary)
        model = baselines.build_cascaded_model(protocol, dictionary)
        self.estimates_ = baselines.omp_estimate(measurements, model, self.sparsity)
        self.h_bar_hat_ = self.estimates_.h_bar
        self.cascaded_hat_ = self.estimates_.cascaded
        return self


class RidgeCascadedBaseline(BaseEstimator):
    """Ridge least squares on the cascaded model; the sanity floor."""

    uses_sensors = False

    def __init__(self, ridge=1e-6):
        self.ridge = ridge

    def fit(self, measurements, protocol=None, dictionary=None, noise_var=None):
        _check_inputs(measurements, protocol, dictionary)
        model = baselines.build_cascaded_model(protocol, dictionary)
        self.estimates_ = baselines.ls_estimate(measurements, model, self.ridge)
        self.h_bar_hat_ = self.estimates_.h_bar
        self.cascaded_hat_ = self.estimates_.cascaded
        return self


def make_estimator(name: str, cfg):
    """Estimator instance for a config; names follow the CLI vocabulary."""
    if name == "visbl":
        return VisblChannelEstimator(
            a=cfg.hyper.a, b=cfg.hyper.b, s_f=cfg.partition.s_f,
            s_g=cfg.partition.s_g, s_h=cfg.partition.s_h,
            max_iters=cfg.stop.max_iters, rel_tol=cfg.stop.rel_tol,
            init_iters=cfg.init_iters)
    if name == "omp":
        return OmpCascadedBaseline(sparsity=cfg.baseline.omp_sparsity)
    if name == "ls":
        return RidgeCascadedBaseline(ridge=cfg.baseline.ridge)
    raise ValueError(f"unknown estimator '{name}'")
