"""Shared numeric oracles for the test suite."""

import numpy as np

from misscausal import numcore as nc


def numeric_grad(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar ``f`` at array ``x``."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        up = f(x)
        flat[i] = old - eps
        down = f(x)
        flat[i] = old
        gf[i] = (up - down) / (2 * eps)
    return g


def rel_error(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(np.linalg.norm(a), np.linalg.norm(b))
    if denom < 1e-10:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)


def check_grads(build, arrays, eps: float = 1e-5) -> float:
    """Worst relative error between autodiff and finite differences.

    ``build(*tensors)`` must return a scalar Tensor; ``arrays`` are the
    float64 inputs to differentiate.
    """
    params = [nc.Tensor(a.copy(), requires_grad=True) for a in arrays]
    loss = build(*params)
    nc.backward(loss)
    worst = 0.0
    for k, a in enumerate(arrays):
        def f(v, k=k):
            vals = [p.data.copy() for p in params]
            vals[k] = v
            return build(*[nc.Tensor(x) for x in vals]).item()

        fd = numeric_grad(f, a.copy(), eps)
        worst = max(worst, rel_error(params[k].grad, fd))
    return worst


def directional_check(build, arrays, gen: np.random.Generator, eps: float = 1e-5) -> float:
    """Compare autodiff with a central difference along one random
    direction per input; cheap enough for networks with many weights."""
    params = [nc.Tensor(a.copy(), requires_grad=True) for a in arrays]
    nc.backward(build(*params))
    worst = 0.0
    for k, a in enumerate(arrays):
        v = gen.normal(size=a.shape)
        vals = [p.data.copy() for p in params]

        def f(t):
            vs = list(vals)
            vs[k] = a + t * v
            return build(*[nc.Tensor(x) for x in vs]).item()

        fd = (f(eps) - f(-eps)) / (2 * eps)
        ad = float(np.sum(params[k].grad * v))
        worst = max(worst, rel_error(ad, fd))
    return worst


def away_from_zero(gen: np.random.Generator, shape, margin: float = 1e-2) -> np.ndarray:
    """Normal draws with |x| >= margin so kinks (relu) are not straddled."""
    x = gen.normal(size=shape)
    return np.where(np.abs(x) < margin, np.copysign(margin, x), x)


def positive(gen: np.random.Generator, shape) -> np.ndarray:
    return gen.uniform(0.5, 2.0, size=shape)


# name -> (builder over Tensors, input generator). A fixed random weight
# matrix R turns each non-scalar output into a scalar loss that touches
# every output element.
def _weighted(out, gen_seed: int = 7):
    w = np.random.default_rng(gen_seed).normal(size=out.shape)
    return nc.sum_(out * w)


GRAD_CASES = {
    "add": (lambda a, b: _weighted(nc.add(a, b)), lambda g: [g.normal(size=(3, 4)), g.normal(size=(4,))]),
    "sub": (lambda a, b: _weighted(nc.sub(a, b)), lambda g: [g.normal(size=(3, 4)), g.normal(size=(3, 1))]),
    "mul": (lambda a, b: _weighted(nc.mul(a, b)), lambda g: [g.normal(size=(3, 4)), g.normal(size=(3, 4))]),
    "scale": (lambda a: _weighted(nc.scale(a, -1.7)), lambda g: [g.normal(size=(2, 5))]),
    "matmul": (lambda a, b: _weighted(nc.matmul(a, b)), lambda g: [g.normal(size=(3, 4)), g.normal(size=(4, 2))]),
    "batched_matmul": (lambda a, b: _weighted(nc.matmul(a, b)),
                       lambda g: [g.normal(size=(2, 3, 4)), g.normal(size=(2, 4, 3))]),
    "relu": (lambda a: _weighted(nc.relu(a)), lambda g: [away_from_zero(g, (3, 4))]),
    "tanh": (lambda a: _weighted(nc.tanh(a)), lambda g: [g.normal(size=(3, 4))]),
    "sigmoid": (lambda a: _weighted(nc.sigmoid(a)), lambda g: [2 * g.normal(size=(3, 4))]),
    "log_sigmoid": (lambda a: _weighted(nc.log_sigmoid(a)), lambda g: [2 * g.normal(size=(3, 4))]),
    "exp": (lambda a: _weighted(nc.exp(a)), lambda g: [g.normal(size=(3, 4))]),
    "log": (lambda a: _weighted(nc.log(a)), lambda g: [positive(g, (3, 4))]),
    "power": (lambda a: _weighted(nc.power(a, 2.5)), lambda g: [positive(g, (3, 4))]),
    "softmax": (lambda a: _weighted(nc.softmax(a)), lambda g: [g.normal(size=(3, 5))]),
    "sum": (lambda a: _weighted(nc.sum_(a, axis=0)), lambda g: [g.normal(size=(3, 4))]),
    "sum_keepdims": (lambda a: _weighted(nc.sum_(a, axis=1, keepdims=True)), lambda g: [g.normal(size=(3, 4))]),
    "mean": (lambda a: _weighted(nc.mean(a, axis=1)), lambda g: [g.normal(size=(3, 4))]),
    "transpose": (lambda a: _weighted(nc.transpose(a)), lambda g: [g.normal(size=(3, 4))]),
    "transpose_axes": (lambda a: _weighted(nc.transpose(a, (1, 0, 2))), lambda g: [g.normal(size=(2, 3, 4))]),
    "reshape": (lambda a: _weighted(nc.reshape(a, (4, 3))), lambda g: [g.normal(size=(3, 4))]),
    "concat": (lambda a, b: _weighted(nc.concat([a, b], axis=1)),
               lambda g: [g.normal(size=(3, 2)), g.normal(size=(3, 4))]),
    "add_n": (lambda a, b, c: _weighted(nc.add_n([a, b, c])),
              lambda g: [g.normal(size=(2, 3)), g.normal(size=(2, 3)), g.normal(size=(2, 3))]),
}


# -- independent oracles ------------------------------------------------------
def dfs_has_cycle(A) -> bool:
    A = np.asarray(A)
    d = A.shape[0]
    state = [0] * d  # 0 new, 1 on stack, 2 done

    def visit(u):
        state[u] = 1
        for v in range(d):
            if A[u, v]:
                if state[v] == 1:
                    return True
                if state[v] == 0 and visit(v):
                    return True
        state[u] = 2
        return False

    return any(state[u] == 0 and visit(u) for u in range(d))


def pinv_bic(A, X) -> float:
    """Equal-variance BIC recomputed with an explicit pseudo-inverse."""
    A = np.asarray(A)
    n, d = X.shape
    total = 0.0
    for j in range(d):
        parents = [i for i in range(d) if A[i, j]]
        D = np.column_stack([np.ones(n)] + [X[:, i] for i in parents])
        beta = np.linalg.pinv(D) @ X[:, j]
        r = X[:, j] - D @ beta
        total += float(r @ r)
    return n * d * np.log(max(total, 1e-12) / (n * d)) + np.log(n) * A.sum()


def pair_status(A, i, j) -> tuple[int, int]:
    return int(A[i, j]), int(A[j, i])


def brute_metrics(E, T) -> dict:
    """FDR / TPR / SHD recomputed from per-pair status, one pair at a time."""
    E = np.asarray(E)
    T = np.asarray(T)
    d = E.shape[0]
    tp = fp = n_pred = n_true = shd = 0
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            if E[i, j]:
                n_pred += 1
                if T[i, j]:
                    tp += 1
                else:
                    fp += 1
            if T[i, j]:
                n_true += 1
    for i in range(d):
        for j in range(i + 1, d):
            if pair_status(E, i, j) != pair_status(T, i, j):
                shd += 1
    return {"fdr": fp / n_pred if n_pred else 0.0, "tpr": tp / n_true if n_true else 0.0, "shd": shd}


def random_dag(gen: np.random.Generator, d: int, p: float = 0.4) -> np.ndarray:
    upper = np.triu(gen.random((d, d)) < p, k=1).astype(np.int8)
    perm = gen.permutation(d)
    return upper[np.ix_(perm, perm)]


def random_digraph(gen: np.random.Generator, d: int, p: float = 0.3) -> np.ndarray:
    A = (gen.random((d, d)) < p).astype(np.int8)
    np.fill_diagonal(A, 0)
    return A
