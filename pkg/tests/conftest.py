"""Shared fixtures: small distributions, specs, and cheap policies."""

import numpy as np
import pytest

from simopt import (
    ParamDistribution,
    SimParams,
    Transform,
    init_policy,
    make_drawer_spec,
    make_peg_spec,
)
from simopt.envs import DRAWER_PARAM_NAMES, DRAWER_TRANSFORMS, PEG_PARAM_NAMES, PEG_TRANSFORMS
from simopt.policy import PolicyParams, PolicySnapshot, flatten_params, unflatten_params


DRAWER_CENTER = np.array([0.7, 0.7, 0.8, 0.8, 1.2, 1.2, 1.0, 3.0, 0.22])
PEG_CENTER = np.array([0.5, 0.5, 0.7, 0.7, 1.0, 1.0, -4.0, 0.4, 0.25, 0.15])


def drawer_params(**overrides) -> SimParams:
    values = DRAWER_CENTER.copy()
    for name, v in overrides.items():
        values[DRAWER_PARAM_NAMES.index(name)] = v
    return SimParams(DRAWER_PARAM_NAMES, values)


def peg_params(**overrides) -> SimParams:
    values = PEG_CENTER.copy()
    for name, v in overrides.items():
        values[PEG_PARAM_NAMES.index(name)] = v
    return SimParams(PEG_PARAM_NAMES, values)


def drawer_dist(cabinet_sigma: float = 0.02, other_scale: float = 1.0) -> ParamDistribution:
    """Gaussian around the drawer center, internal space."""
    mean = DRAWER_CENTER.copy()
    for i, tf in enumerate(DRAWER_TRANSFORMS):
        if tf.kind == "log":
            mean[i] = np.log(mean[i])
    var = np.array([0.04, 0.04, 0.01, 0.01, 0.0025, 0.0025, 0.01, 0.04, 0.0]) * other_scale
    var[8] = cabinet_sigma**2
    return ParamDistribution(DRAWER_PARAM_NAMES, mean, np.diag(np.maximum(var, 1e-12)), DRAWER_TRANSFORMS)


def peg_dist(scale: float = 1.0) -> ParamDistribution:
    mean = PEG_CENTER.copy()
    for i, tf in enumerate(PEG_TRANSFORMS):
        if tf.kind == "log":
            mean[i] = np.log(mean[i])
    var = np.array([0.04, 0.04, 0.01, 0.01, 0.0025, 0.0025, 0.09, 0.01, 0.01, 0.01]) * scale
    return ParamDistribution(PEG_PARAM_NAMES, mean, np.diag(np.maximum(var, 1e-12)), PEG_TRANSFORMS)


def gauss1d(mu: float, var: float, name: str = "x") -> ParamDistribution:
    return ParamDistribution(
        (name,), np.array([mu]), np.array([[var]]), (Transform("identity"),)
    )


def random_dist(rng: np.random.Generator, d: int) -> ParamDistribution:
    a = rng.standard_normal((d, d))
    cov = a @ a.T + 0.1 * np.eye(d)
    names = tuple(f"p{i}" for i in range(d))
    transforms = tuple(Transform("identity") for _ in range(d))
    return ParamDistribution(names, rng.standard_normal(d), cov, transforms)


def zero_snapshot(obs_dim: int, act_dim: int) -> PolicySnapshot:
    """Policy whose mean action is exactly zero everywhere."""
    template = init_policy(obs_dim, act_dim, seed=0)
    flat, manifest = flatten_params(template)
    params = unflatten_params(PolicyParams, np.zeros_like(flat), manifest)
    return PolicySnapshot(params, np.zeros(obs_dim), np.ones(obs_dim))


@pytest.fixture(scope="session")
def drawer_spec():
    return make_drawer_spec()


@pytest.fixture(scope="session")
def peg_spec():
    return make_peg_spec()


@pytest.fixture(scope="session")
def drawer_policy(drawer_spec):
    """Untrained policy snapshot with identity normalization."""
    params = init_policy(drawer_spec.obs_dim, drawer_spec.act_dim, seed=7)
    return PolicySnapshot(params, np.zeros(drawer_spec.obs_dim), np.ones(drawer_spec.obs_dim))


@pytest.fixture(scope="session")
def peg_policy(peg_spec):
    params = init_policy(peg_spec.obs_dim, peg_spec.act_dim, seed=7)
    return PolicySnapshot(params, np.zeros(peg_spec.obs_dim), np.ones(peg_spec.obs_dim))
