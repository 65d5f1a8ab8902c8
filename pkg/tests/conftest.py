import numpy as np
import pytest

import caopt


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger JIT compilation once so timed tests measure algorithm work."""
    rng = np.random.default_rng(0)
    F = rng.standard_normal((40, 2))
    mu = caopt.DiscreteMeasure.uniform(40)
    caopt.recombine(F, mu)
    caopt.recombine_hierarchical(F, mu)
    ds = caopt.gen_logistic_2d(200, seed=0)
    model = caopt.ModelSpec("logistic")
    cfg = caopt.CaGDConfig(gamma=0.1, eps_grad=1e-2, it_max=50)
    caopt.cagd(model, ds, cfg)


def make_lasso_instance(n, d, seed, l1_lambda=0.01):
    ds, _ = caopt.gen_dataset_A(n, d, seed)
    return caopt.ModelSpec("least_squares", l1_lambda=l1_lambda), ds


def make_logistic_instance(n, seed, intercept=True):
    ds = caopt.gen_logistic_2d(n, seed=seed)
    if intercept:
        ds = caopt.Dataset(caopt.add_intercept(ds.X), ds.y)
    return caopt.ModelSpec("logistic"), ds
