"""Hot numeric kernels: reservoir recurrence and logistic-regression descent.

Each kernel has a pure-numpy implementation (``*_py``) and a JIT path
selected at import time; setting ``BIKEML_NO_NUMBA=1`` (or numba being
unavailable) keeps the numpy fallbacks active. ``BACKEND`` records which
path won (it also goes into CLI run manifests) and
``benchmarks/bench_kernels.py`` compares the two.

The reservoir kernel is one source compiled both ways. The descent kernel
has a dedicated loop body for the JIT path: at the tiny matrix sizes this
package trains (tens of samples, ~10-20 features), per-iteration BLAS
dispatch and allocations dominate the vectorized version, and the
10000-iteration descent budget only fits the runtime acceptance envelope
with the loop form. Both paths are held together by parity tests.
"""

import os

import numpy as np

_DISABLE = os.environ.get("BIKEML_NO_NUMBA", "").lower() in ("1", "true", "yes")

# Descent loop status codes.
LOGREG_CONVERGED = 0
LOGREG_MAX_ITERS = 1
LOGREG_STALLED = 2
LOGREG_NON_FINITE = 3


def run_reservoir_py(w_in, w, leak, inputs):
    """Drive a leaky tanh reservoir from the zero state over an input sequence.

    ``w_in`` is (n_res, d+1) with the bias in column 0, ``w`` the (n_res,
    n_res) recurrent matrix, ``inputs`` the (T, d) sequence. Returns the
    (T, n_res) state trajectory; row t is the state after consuming input t.
    """
    n_steps = inputs.shape[0]
    n_res = w.shape[0]
    bias = np.ascontiguousarray(w_in[:, 0])
    w_u = np.ascontiguousarray(w_in[:, 1:])
    states = np.empty((n_steps, n_res))
    state = np.zeros(n_res)
    for t in range(n_steps):
        pre = bias + np.dot(w_u, inputs[t]) + np.dot(w, state)
        state = (1.0 - leak) * state + leak * np.tanh(pre)
        states[t] = state
    return states


def logreg_fit_py(x, y, lam, lr, max_iters, tol):
    """Full-batch gradient descent on mean cross-entropy + 0.5*lam*||W||^2.

    ``x`` is (n, d), ``y`` one-hot (n, k). The step size halves whenever a
    step would increase the loss, so accepted losses are non-increasing.
    Stops when the gradient infinity norm drops below ``tol``.

    Returns (w (d, k), b (k,), iterations_taken, status).
    """
    n, d = x.shape
    k = y.shape[1]
    w = np.zeros((d, k))
    b = np.zeros(k)
    xt = np.ascontiguousarray(x.T)
    inv_n = 1.0 / n

    def evaluate(w, b):
        z = np.dot(x, w) + b
        m = np.empty(n)
        for i in range(n):
            m[i] = np.max(z[i])
        e = np.exp(z - m.reshape(n, 1))
        s = np.sum(e, axis=1)
        nll = np.mean(m + np.log(s) - np.sum(y * z, axis=1))
        loss = nll + 0.5 * lam * np.sum(w * w)
        p = e / s.reshape(n, 1)
        return loss, p

    loss, p = evaluate(w, b)
    if not np.isfinite(loss):
        return w, b, 0, LOGREG_NON_FINITE

    for it in range(1, max_iters + 1):
        gw = np.dot(xt, p - y) * inv_n + lam * w
        gb = np.sum(p - y, axis=0) * inv_n
        gmax = max(np.max(np.abs(gw)), np.max(np.abs(gb)))
        if gmax < tol:
            return w, b, it - 1, LOGREG_CONVERGED
        while True:
            w2 = w - lr * gw
            b2 = b - lr * gb
            loss2, p2 = evaluate(w2, b2)
            if not np.isfinite(loss2):
                return w, b, it - 1, LOGREG_NON_FINITE
            if loss2 <= loss:
                break
            lr *= 0.5
            if lr < 1e-14:
                return w, b, it - 1, LOGREG_STALLED
        w, b, loss, p = w2, b2, loss2, p2
    return w, b, max_iters, LOGREG_MAX_ITERS


def _logreg_fit_loops(x, y, lam, lr, max_iters, tol):
    """Loop form of logreg_fit_py with preallocated buffers; same contract.

    One pass per candidate computes loss and gradient together, so an
    accepted step already carries the gradient for the next iteration.
    """
    n, d = x.shape
    k = y.shape[1]
    inv_n = 1.0 / n
    w = np.zeros((d, k))
    b = np.zeros(k)
    w2 = np.empty((d, k))
    b2 = np.empty(k)
    gw = np.empty((d, k))
    gb = np.empty(k)
    gw2 = np.empty((d, k))
    gb2 = np.empty(k)
    z = np.empty(k)
    prow = np.empty(k)

    def evaluate(wc, bc, gwout, gbout):
        nll = 0.0
        for t in range(d):
            for j in range(k):
                gwout[t, j] = lam * wc[t, j]
        for j in range(k):
            gbout[j] = 0.0
        for i in range(n):
            for j in range(k):
                z[j] = bc[j]
            for t in range(d):
                xit = x[i, t]
                for j in range(k):
                    z[j] += xit * wc[t, j]
            zmax = z[0]
            for j in range(1, k):
                if z[j] > zmax:
                    zmax = z[j]
            total = 0.0
            ydot = 0.0
            for j in range(k):
                e = np.exp(z[j] - zmax)
                prow[j] = e
                total += e
                ydot += y[i, j] * z[j]
            inv = 1.0 / total
            nll += zmax + np.log(total) - ydot
            for j in range(k):
                diff = (prow[j] * inv - y[i, j]) * inv_n
                prow[j] = diff
                gbout[j] += diff
            for t in range(d):
                xit = x[i, t]
                for j in range(k):
                    gwout[t, j] += prow[j] * xit
        penalty = 0.0
        for t in range(d):
            for j in range(k):
                penalty += wc[t, j] * wc[t, j]
        return nll * inv_n + 0.5 * lam * penalty

    loss = evaluate(w, b, gw, gb)
    if not np.isfinite(loss):
        return w, b, 0, LOGREG_NON_FINITE

    for it in range(1, max_iters + 1):
        gmax = 0.0
        for t in range(d):
            for j in range(k):
                a = abs(gw[t, j])
                if a > gmax:
                    gmax = a
        for j in range(k):
            a = abs(gb[j])
            if a > gmax:
                gmax = a
        if gmax < tol:
            return w, b, it - 1, LOGREG_CONVERGED
        while True:
            for t in range(d):
                for j in range(k):
                    w2[t, j] = w[t, j] - lr * gw[t, j]
            for j in range(k):
                b2[j] = b[j] - lr * gb[j]
            loss2 = evaluate(w2, b2, gw2, gb2)
            if not np.isfinite(loss2):
                return w, b, it - 1, LOGREG_NON_FINITE
            if loss2 <= loss:
                break
            lr *= 0.5
            if lr < 1e-14:
                return w, b, it - 1, LOGREG_STALLED
        w, w2 = w2, w
        b, b2 = b2, b
        gw, gw2 = gw2, gw
        gb, gb2 = gb2, gb
        loss = loss2
    return w, b, max_iters, LOGREG_MAX_ITERS


def logistic_loss_and_grad(x, y, w, b, lam):
    """Loss and analytic gradients at (w, b); the reference for descent steps.

    Kept outside the JIT path so finite-difference checks probe the same
    arithmetic the kernel uses.
    """
    n = x.shape[0]
    z = x @ w + b
    m = z.max(axis=1)
    e = np.exp(z - m[:, None])
    s = e.sum(axis=1)
    nll = np.mean(m + np.log(s) - np.sum(y * z, axis=1))
    loss = nll + 0.5 * lam * np.sum(w * w)
    p = e / s[:, None]
    gw = x.T @ (p - y) / n + lam * w
    gb = (p - y).sum(axis=0) / n
    return loss, gw, gb


if _DISABLE:
    BACKEND = "numpy"
else:
    try:
        import numba

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        BACKEND = "numpy"

if BACKEND == "numba":
    run_reservoir = numba.njit(cache=True, nogil=True)(run_reservoir_py)
    logreg_fit = numba.njit(cache=True, nogil=True, fastmath=True)(_logreg_fit_loops)
else:
    run_reservoir = run_reservoir_py
    logreg_fit = logreg_fit_py
