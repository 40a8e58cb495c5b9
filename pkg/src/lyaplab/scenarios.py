"""Built-in scenarios; each one has an analytic or exact oracle."""
from __future__ import annotations

import math

import numpy as np

from .estimators import SubspaceSpec
from .experiments import ScenarioConfig
from .linalg import DomainError
from .walk import IncrementLaw

A_DIAG = np.diag([3.0, 1.0, 1.0 / 3.0]).astype(complex)
SIGMA = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], dtype=complex)
OMEGA = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=complex)


def counterexample_law() -> IncrementLaw:
    """Markov chain on {a, sigma, omega}: a -> a or sigma (1/2 each),
    sigma -> omega, omega -> a; started from its stationary law."""
    kernel = np.array([[0.5, 0.5, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    return IncrementLaw(
        kind="markov_finite",
        support=(A_DIAG, SIGMA, OMEGA),
        kernel=kernel,
        initial=np.array([0.5, 0.25, 0.25]),
        labels=("a", "sigma", "omega"),
    )


def _iid(support, weights=None, labels=()):
    m = len(support)
    w = np.full(m, 1.0 / m) if weights is None else weights
    return IncrementLaw(kind="iid_finite", support=tuple(support), weights=w, labels=labels)


def _counterexample(seed: int) -> ScenarioConfig:
    return ScenarioConfig("paper-counterexample", counterexample_law(), n_max=30000,
                          trials=1, master_seed=seed, checkpoint_stride=1, checkpoint_growth=1.0)


def _sl2(seed: int) -> ScenarioConfig:
    law = _iid([[[2, 1], [1, 1]], [[1, 1], [1, 2]]], labels=("A", "B"))
    return ScenarioConfig("sl2-irreducible", law, n_max=10000, trials=100, master_seed=seed,
                          extra_checkpoints=(200, 1000))


def _lower_triangular(seed: int) -> ScenarioConfig:
    law = _iid([[[2, 0], [1, 0.5]], [[2, 0], [-1, 0.5]]], labels=("T+", "T-"))
    e2 = SubspaceSpec(np.array([[0, 1]]), 2)
    return ScenarioConfig(
        "lower-triangular-reducible", law, n_max=10000, trials=100, master_seed=seed,
        extra_checkpoints=(1000,), l_mu=e2, l_mu_check=SubspaceSpec(np.zeros((0, 2)), 2),
        probe_vector=np.array([1.0, 1.0]) / math.sqrt(2.0), epsilons=(0.1,),
    )


def _unitary_null(seed: int) -> ScenarioConfig:
    c, s = math.cos(0.7), math.sin(0.7)
    rot = [[c, -s], [s, c]]
    phase = np.diag([np.exp(1j * 0.3), np.exp(-1j * 1.1)])
    law = _iid([rot, phase], labels=("rotation", "phase"))
    return ScenarioConfig("unitary-null", law, n_max=10000, trials=10, master_seed=seed)


def _gelfand(seed: int) -> ScenarioConfig:
    law = _iid([[[0, 2], [0.5, 0]]], labels=("g",))
    return ScenarioConfig("deterministic-gelfand", law, n_max=10000, trials=1, master_seed=seed)


BUILTINS = {
    "paper-counterexample": _counterexample,
    "sl2-irreducible": _sl2,
    "lower-triangular-reducible": _lower_triangular,
    "unitary-null": _unitary_null,
    "deterministic-gelfand": _gelfand,
}


def builtin(name: str, seed: int = 0) -> ScenarioConfig:
    try:
        return BUILTINS[name](seed)
    except KeyError:
        raise DomainError(f"unknown built-in scenario {name!r}; known: {', '.join(BUILTINS)}") from None
