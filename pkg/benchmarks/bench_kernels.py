"""Time the numpy and numba kernel backends on random inputs.

    python benchmarks/bench_kernels.py [--repeat N]

Each kernel is checked for equal output before it is timed.
"""
import argparse
import timeit

import numpy as np

from evrel import _kernels


def random_dag(rng, n, density):
    upper = np.triu(rng.random((n, n)) < density, k=1)
    perm = rng.permutation(n)
    return upper[np.ix_(perm, perm)]


def csr(rng, rows, per_row, vocab):
    lengths = rng.integers(1, per_row + 1, size=rows)
    indptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    indices = rng.integers(0, vocab, size=indptr[-1]).astype(np.int64)
    return indptr, indices, rng.normal(size=vocab)


def cases(rng):
    for n in (10, 40, 120):
        dag = random_dag(rng, n, 0.1)
        closed = _kernels.numpy_impl.closure(dag)
        yield f"closure n={n}", "closure", (dag,)
        yield f"reduce_closed n={n}", "reduce_closed", (closed,)
        yield f"add_edge n={n}", "add_edge", (closed.copy(), 0, n - 1)
    for n in (10, 40):
        reduced = _kernels.numpy_impl.reduce_closed(_kernels.numpy_impl.closure(random_dag(rng, n, 0.1)))
        xs, ys = (a.astype(np.int64) for a in np.nonzero(reduced))
        reach = _kernels.numpy_impl.closure(reduced)
        yield f"can_add n={n}", "can_add", (reach, xs, ys, 0, n - 1)
        m = 2 * (n - 1)
        ea = rng.integers(0, n, size=m).astype(np.int64)
        eb = rng.integers(0, n, size=m).astype(np.int64)
        pid = np.arange(m, dtype=np.int64) // 2
        gain = np.sort(rng.normal(size=m))[::-1].copy()
        tgt = rng.integers(1, n + 1, size=m).astype(np.int64)
        linked = np.zeros(n + 1, dtype=np.bool_)
        linked[tgt[: n // 2]] = True
        must = np.zeros(n + 1, dtype=np.bool_)
        yield (f"reinsert_scan n={n}", "reinsert_scan",
               (reach, xs, ys, ea, eb, pid, gain, tgt, linked, rng.normal(size=n + 1), must, 0.0, -np.inf))
    for rows in (1_000, 50_000):
        yield f"row_sums rows={rows}", "row_sums", csr(rng, rows, 60, 20_000)


def same_output(a, b) -> bool:
    if isinstance(a, tuple):
        return len(a) == len(b) and all(same_output(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    return np.allclose(a, b) if a.dtype.kind == "f" else np.array_equal(a, b)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels.numba_impl is None:
        print("numba unavailable or disabled (EVREL_DISABLE_NUMBA); timing numpy only")
    rng = np.random.default_rng(0)
    print(f"{'case':<22} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for label, name, inputs in cases(rng):
        timings = {}
        outputs = {}
        for backend in ("numpy", "numba"):
            impl = getattr(_kernels, f"{backend}_impl")
            if impl is None:
                continue
            fn = getattr(impl, name)

            def call(fn=fn):
                fresh = tuple(x.copy() if isinstance(x, np.ndarray) else x for x in inputs)
                result = fn(*fresh)
                return fresh[0] if result is None else result

            outputs[backend] = call()  # also compiles the numba version
            number = 20
            best = min(timeit.repeat(call, number=number, repeat=args.repeat)) / number
            timings[backend] = best * 1e3
        if len(outputs) == 2:
            if not same_output(outputs["numpy"], outputs["numba"]):
                raise SystemExit(f"{label}: backends disagree")
        nb = timings.get("numba")
        speed = f"{timings['numpy'] / nb:7.1f}x" if nb else "      -"
        nb_text = f"{nb:10.3f}" if nb else f"{'-':>10}"
        print(f"{label:<22} {timings['numpy']:10.3f} {nb_text} {speed}")


if __name__ == "__main__":
    main()
