"""Proximal sampler with a rejection-sampling restricted Gaussian oracle.

Modules: ``potentials`` (targets and smoothness checks), ``proxmap``
(stationary points of the regularised potential), ``rgo`` (the oracle),
``stepsize`` (step-size formulas and run planning), ``sampler`` (chains and
baselines), ``concentration`` (tail bounds and their Monte Carlo check),
``metrics`` (W2/TV estimators) and ``cli``.
"""
from .potentials import Potential, SemiSmoothSpec, eval_potential, eval_subgradient
from .rgo import rgo_sample
from .sampler import run_proximal_sampler
from .stepsize import Plan, plan_run

__all__ = [
    "Plan",
    "Potential",
    "SemiSmoothSpec",
    "eval_potential",
    "eval_subgradient",
    "plan_run",
    "rgo_sample",
    "run_proximal_sampler",
]
__version__ = "0.1.0"
