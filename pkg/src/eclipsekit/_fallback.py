"""Pure numpy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable or when
``ECLIPSEKIT_PURE_PYTHON=1`` is set. Signatures and results match the
extension exactly (up to floating point summation order).
"""

import numpy as np

TAU = 1e-12


def reflect_index(i, n):
    # mirror without repeating the edge sample
    if n == 1:
        return 0
    period = 2 * (n - 1)
    m = i % period
    return period - m if m >= n else m


def convolve2d_reflect(plane, kernel):
    plane = np.ascontiguousarray(plane, dtype=np.float64)
    kernel = np.ascontiguousarray(kernel, dtype=np.float64)
    h, w = plane.shape
    k = kernel.shape[0]
    c = k // 2
    rows = np.array([reflect_index(i, h) for i in range(-c, h + c)])
    cols = np.array([reflect_index(j, w) for j in range(-c, w + c)])
    padded = plane[np.ix_(rows, cols)]
    out = np.zeros((h, w), dtype=np.float64)
    # true convolution: weight (a, b) pairs with offset (c - a, c - b)
    for a in range(k):
        for b in range(k):
            wgt = kernel[a, b]
            if wgt != 0.0:
                out += wgt * padded[k - 1 - a:k - 1 - a + h, k - 1 - b:k - 1 - b + w]
    return out


def _select_working_set(alpha, grad, y, K, C, eps):
    n = y.shape[0]
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    yg = -y * grad
    if not up.any() or not low.any():
        return -1, -1, 0.0
    cand = np.where(up, yg, -np.inf)
    i = int(np.argmax(cand))
    gmax = cand[i]
    low_vals = np.where(low, yg, np.inf)
    gmin = low_vals.min()
    if gmax - gmin < eps:
        return -1, -1, gmax - gmin
    b = gmax - yg
    ok = low & (b > 0)
    if not ok.any():
        return -1, -1, gmax - gmin
    a = K[i, i] + np.diag(K) - 2.0 * K[i]
    a = np.where(a > 0, a, TAU)
    obj = np.where(ok, -(b * b) / a, np.inf)
    j = int(np.argmin(obj))
    return i, j, gmax - gmin


def smo_solve(K, y, C, tol=1e-3, max_iter=1_000_000):
    """Solve the C-SVC dual on a precomputed kernel matrix.

    Returns ``(alpha, rho, n_iter)``; the decision function is
    ``sum(alpha * y * K[:, x]) - rho``.
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = y.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)
    it = 0
    while it < max_iter:
        i, j, _ = _select_working_set(alpha, grad, y, K, C, tol)
        if i < 0:
            break
        it += 1
        old_ai, old_aj = alpha[i], alpha[j]
        qii, qjj, qij = K[i, i], K[j, j], y[i] * y[j] * K[i, j]
        if y[i] != y[j]:
            quad = qii + qjj + 2.0 * qij
            if quad <= 0:
                quad = TAU
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = qii + qjj - 2.0 * qij
            if quad <= 0:
                quad = TAU
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        dai = alpha[i] - old_ai
        daj = alpha[j] - old_aj
        grad += y * (K[:, i] * (y[i] * dai) + K[:, j] * (y[j] * daj))
    return alpha, _rho(alpha, grad, y, C), it


def _rho(alpha, grad, y, C):
    yg = y * grad
    ub, lb = np.inf, -np.inf
    total, nfree = 0.0, 0
    for t in range(y.shape[0]):
        if alpha[t] >= C:
            if y[t] < 0:
                ub = min(ub, yg[t])
            else:
                lb = max(lb, yg[t])
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg[t])
            else:
                lb = max(lb, yg[t])
        else:
            nfree += 1
            total += yg[t]
    if nfree > 0:
        return total / nfree
    return (ub + lb) / 2.0
