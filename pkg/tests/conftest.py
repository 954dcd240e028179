import numpy as np
import pytest

from saflex.nn import ModelParams, ParamGrad, init_mlp


def random_grad(params: ModelParams, rng: np.random.Generator, scale: float = 1.0) -> ParamGrad:
    return ParamGrad(
        [scale * rng.standard_normal(w.shape) for w in params.weights],
        [scale * rng.standard_normal(b.shape) for b in params.biases],
    )


def small_mlp(dims=(3, 8, 6, 4), seed=0) -> ModelParams:
    return init_mlp(list(dims), seed=seed)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
