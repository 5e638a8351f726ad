"""Central finite-difference checks for the autodiff engine."""
import numpy as np


def numerical_grad(f, arrays, step=1e-5):
    """Central differences of scalar ``f()`` w.r.t. each array, perturbed in place."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            orig = arr[i]
            arr[i] = orig + step
            fp = float(f())
            arr[i] = orig - step
            fm = float(f())
            arr[i] = orig
            g[i] = (fp - fm) / (2 * step)
        grads.append(g)
    return grads


def rel_error(a, b, floor=1e-8):
    """max |a - b| / max(|a|, |b|, floor), elementwise maximum."""
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def gradcheck(build_loss, params, step=1e-5):
    """Return the worst relative error between autodiff and finite differences.

    ``build_loss`` rebuilds the graph from the current ``params`` (Tensors
    with ``requires_grad``) and returns the scalar loss Tensor.
    """
    for p in params:
        p.zero_grad()
    build_loss().backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    numeric = numerical_grad(lambda: build_loss().data, [p.data for p in params], step)
    return max(_scaled_error(a, n) for a, n in zip(analytic, numeric))


def _scaled_error(a, n):
    # relative to the gradient's overall magnitude so near-zero entries do not
    # blow up the ratio
    scale = max(np.max(np.abs(a)), np.max(np.abs(n)), 1e-8)
    return float(np.max(np.abs(a - n)) / scale)
