"""Independent reference implementations used only by the tests.

Everything here is plain-Python loops (or torch autograd for gradients),
sharing no code with the package under test.
"""
import math


def matvec(A, x):
    return [sum(A[i][j] * x[j] for j in range(len(x))) for i in range(len(A))]


def rms_normalize(v, eps=1e-8):
    r = math.sqrt(sum(a * a for a in v) / len(v) + eps)
    return [a / r for a in v]


def policy(weights, biases, activation, b, eps=1e-8):
    h = list(b)
    for i, A in enumerate(weights):
        h = matvec(A, h)
        if biases is not None:
            h = [a + c for a, c in zip(h, biases[i])]
        if activation == "relu" and i < len(weights) - 1:
            h = [a if a > 0 else 0.0 for a in h]
    return rms_normalize(h, eps)


def td(W, b_prev, b_next, gamma):
    nxt = matvec(W, b_next)
    cur = matvec(W, b_prev)
    return [b_next[i] + gamma * nxt[i] - cur[i] for i in range(len(b_prev))]


def rollout(weights, biases, activation, b_start, T, W_ref, gamma, eta):
    W_ref = [list(map(float, row)) for row in W_ref]
    bs = [list(map(float, b_start))]
    for _ in range(T):
        bs.append(policy(weights, biases, activation, bs[-1]))
    static = [td(W_ref, bs[k - 1], bs[k], gamma) for k in range(1, T + 1)]
    W = [row[:] for row in W_ref]
    snaps = [[row[:] for row in W]]
    dynamic = []
    for k in range(1, T + 1):
        dlt = td(W, bs[k - 1], bs[k], gamma)
        dynamic.append(dlt)
        W = [[W[i][j] + eta * dlt[i] * bs[k - 1][j] for j in range(len(W))] for i in range(len(W))]
        snaps.append([row[:] for row in W])
    s = sum(sum(x * x for x in d) for d in static)
    dyn = sum(sum(x * x for x in d) for d in dynamic)
    return dict(behaviours=bs, static=static, dynamic=dynamic, snaps=snaps, static_sum=s, dynamic_sum=dyn,
                interactivity=s - dyn)


def torch_objective_grad(weights, biases, activation, b_start, T, W_ref, gamma, eta, eps=1e-8):
    """J and dJ/dparams via torch autograd, float64."""
    import torch

    Ws = [torch.tensor(w, dtype=torch.float64, requires_grad=True) for w in weights]
    cs = [torch.tensor(c, dtype=torch.float64, requires_grad=True) for c in biases] if biases is not None else []

    def pol(b):
        h = b
        for i, A in enumerate(Ws):
            h = A @ h
            if cs:
                h = h + cs[i]
            if activation == "relu" and i < len(Ws) - 1:
                h = torch.relu(h)
        return h / torch.sqrt(torch.mean(h * h) + eps)

    W0 = torch.tensor(W_ref, dtype=torch.float64)
    bs = [torch.tensor(b_start, dtype=torch.float64)]
    for _ in range(T):
        bs.append(pol(bs[-1]))
    J = torch.zeros((), dtype=torch.float64)
    W = W0
    for k in range(1, T + 1):
        ds = bs[k] + gamma * (W0 @ bs[k]) - W0 @ bs[k - 1]
        dd = bs[k] + gamma * (W @ bs[k]) - W @ bs[k - 1]
        J = J + ds @ ds - dd @ dd
        W = W + eta * torch.outer(dd, bs[k - 1])
    J.backward()
    grads = [w.grad.numpy().copy() for w in Ws] + [c.grad.numpy().copy() for c in cs]
    return float(J.detach()), grads


def rmsprop(param, grad, v, lr, decay, eps):
    """Ascent step; returns (param, v) as new arrays."""
    v = decay * v + (1 - decay) * grad * grad
    return param + lr * grad / ((v ** 0.5) + eps), v


def tm_run(transitions, start, blank, tape, steps, final=()):
    """Plain tape-and-head simulator: list of (state, head, {pos: sym}) per step."""
    cells = {i: a for i, a in enumerate(tape) if a != blank}
    q, h = start, 0
    out = [(q, h, dict(cells))]
    for _ in range(steps):
        if q in final:
            out.append((q, h, dict(cells)))
            continue
        a = cells.get(h, blank)
        q, w, d = transitions[(q, a)]
        if w == blank:
            cells.pop(h, None)
        else:
            cells[h] = w
        h += -1 if d == "L" else 1
        out.append((q, h, dict(cells)))
    return out


def life_dense(cells, steps, pad=None):
    """Dense-array Life inside a frame big enough to never touch its edge."""
    import numpy as np

    cells = list(cells)
    pad = pad if pad is not None else steps + 2
    xs = [c[0] for c in cells] or [0]
    ys = [c[1] for c in cells] or [0]
    x0, y0 = min(xs) - pad, min(ys) - pad
    grid = np.zeros((max(xs) - x0 + pad + 1, max(ys) - y0 + pad + 1), dtype=int)
    for x, y in cells:
        grid[x - x0, y - y0] = 1
    for _ in range(steps):
        n = sum(np.roll(np.roll(grid, dx, 0), dy, 1) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if dx or dy)
        grid = ((n == 3) | ((n == 2) & (grid == 1))).astype(int)
    return {(int(i) + x0, int(j) + y0) for i, j in zip(*np.nonzero(grid))}
