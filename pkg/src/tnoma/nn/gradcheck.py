"""Central finite-difference gradient checks."""

import numpy as np

from .tensor import Tensor


def numeric_grad(f, arrays, h=1e-5):
    """Central differences of scalar ``f()`` w.r.t. each array, perturbed in place."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        it = np.nditer(a, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = a[idx]
            a[idx] = old + h
            fp = f()
            a[idx] = old - h
            fm = f()
            a[idx] = old
            g[idx] = (fp - fm) / (2 * h)
        grads.append(g)
    return grads


def relative_error(a, b, floor=1e-8):
    """max |a - b| / max(|a|, |b|, floor), taken over the whole array."""
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), floor)
    return float(np.max(np.abs(a - b)) / scale)


def check_gradients(fn, tensors, h=1e-5, floor=1e-8):
    """Compare autograd and finite-difference gradients of scalar ``fn()``.

    ``fn`` must rebuild the graph from ``tensors`` on each call.  Returns
    the list of relative errors.  ``floor`` bounds the denominator from
    below so that parameters with an exactly zero gradient (the difference
    quotient is then pure roundoff, about eps |f| / h) do not register as
    large relative errors.
    """
    for t in tensors:
        t.grad = None
    out = fn()
    out.backward()
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]
    numeric = numeric_grad(lambda: float(fn().data), [t.data for t in tensors], h)
    return [relative_error(a, n, floor) for a, n in zip(analytic, numeric)]


__all__ = ["numeric_grad", "relative_error", "check_gradients", "Tensor"]
