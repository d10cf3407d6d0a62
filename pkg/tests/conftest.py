import numpy as np
import pytest


def finite_difference(f, arrays: dict, step: float = 1e-5) -> dict:
    """Central finite differences of the scalar f() w.r.t. every entry of
    every array, perturbing in place."""
    out = {}
    for name, a in arrays.items():
        g = np.zeros_like(a, dtype=np.float64)
        flat, gf = a.ravel(), g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            fp = f()
            flat[i] = orig - step
            fm = f()
            flat[i] = orig
            gf[i] = (fp - fm) / (2.0 * step)
        out[name] = g
    return out


def max_rel_err(analytic, fd) -> float:
    """Componentwise |a - f| / max(|a|, |f|, 1): relative for large entries,
    absolute for small ones (finite differences bottom out near 1e-10)."""
    a = np.asarray(analytic, dtype=np.float64)
    f = np.asarray(fd, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), 1.0)
    return float(np.max(np.abs(a - f) / denom))


def assert_grads_close(analytic: dict, fd: dict, tol: float) -> None:
    for name in fd:
        err = max_rel_err(analytic[name], fd[name])
        assert err < tol, f"gradient mismatch for {name}: {err:.3e} >= {tol}"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
