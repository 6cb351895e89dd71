import numpy as np
import pytest

from modecodec import nn


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def central_diff(func, arrays, which, h=1e-6, subsample=None, rng=None):
    """Finite-difference gradient of scalar func w.r.t. arrays[which].

    Returns (indices, fd_grads). With subsample set, only that many randomly
    chosen coordinates are probed, which keeps checks on large tensors fast.
    """
    base = [a.astype(np.float64).copy() for a in arrays]
    target = base[which]
    flat = target.reshape(-1)
    n = flat.size
    if subsample is not None and subsample < n:
        idx = rng.choice(n, size=subsample, replace=False)
    else:
        idx = np.arange(n)
    grads = np.zeros(len(idx))
    for j, i in enumerate(idx):
        orig = flat[i]
        step = h * max(1.0, abs(orig))
        flat[i] = orig + step
        fp = func(*base)
        flat[i] = orig - step
        fm = func(*base)
        flat[i] = orig
        grads[j] = (fp - fm) / (2 * step)
    return idx, grads


def check_gradients(build_loss, arrays, rtol=1e-5, atol=1e-8, subsample=None, seed=1):
    """Compare autodiff gradients of build_loss against central differences.

    build_loss takes Tensors (float64, requires_grad) and returns a scalar
    Tensor. arrays are the numpy inputs. Every input is checked.
    """
    gen = np.random.default_rng(seed)
    tensors = [nn.Tensor(a.astype(np.float64), requires_grad=True) for a in arrays]
    loss = build_loss(*tensors)
    loss.backward()

    def scalar_func(*arrs):
        ts = [nn.Tensor(a) for a in arrs]
        return build_loss(*ts).item()

    for which, t in enumerate(tensors):
        idx, fd = central_diff(scalar_func, arrays, which, subsample=subsample, rng=gen)
        an = t.grad.reshape(-1)[idx]
        err = np.abs(an - fd)
        ok = err <= atol + rtol * np.maximum(np.abs(an), np.abs(fd))
        assert ok.all(), (
            f"gradcheck failed for input {which}: worst abs err "
            f"{err[~ok].max():.3e} at analytic {an[~ok][0]:.6e} vs fd {fd[~ok][0]:.6e}"
        )
