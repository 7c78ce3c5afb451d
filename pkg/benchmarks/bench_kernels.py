"""Timing comparison between the compiled kernels and the pure-Python path.

Runs the hot inner loops (patch extraction, scatter-add, upsampling) and one
full training step per backend, printing a table of per-call times. Invoke
with the package importable:

    python benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from spadesynth import kernels
from spadesynth.config import DataConfig, TrainConfig
from spadesynth.networks import DiscriminatorConfig, GeneratorConfig


def _time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(repeat: int):
    shapes = {
        "im2col 8x16x32x32 k3": ((8, 16, 34, 34), 3, 1, 32, 32),
        "im2col 8x64x8x8 k3": ((8, 64, 10, 10), 3, 1, 8, 8),
    }
    rng = np.random.default_rng(0)
    rows = []
    for label, (shape, k, stride, ho, wo) in shapes.items():
        xp = rng.standard_normal(shape).astype(np.float32)
        for backend, mod in kernels.backends().items():
            fn = lambda: mod.im2col(xp, k, stride, ho, wo)
            rows.append((label, backend, _time(fn, repeat)))

    n, c, k, ho, wo = 8, 16, 3, 32, 32
    gcols = rng.standard_normal((n, c, k, k, ho, wo)).astype(np.float32)
    for backend, mod in kernels.backends().items():

        def col2im():
            gxp = np.zeros((n, c, ho + 2, wo + 2), dtype=np.float32)
            mod.col2im_add(gcols, k, 1, gxp)

        rows.append(("col2im_add 8x16x32x32 k3", backend, _time(col2im, repeat)))

    x = rng.standard_normal((8, 16, 16, 16)).astype(np.float32)
    for backend, mod in kernels.backends().items():
        rows.append(
            ("upsample x2 8x16x16x16", backend,
             _time(lambda: mod.upsample_nearest(x, 2), repeat))
        )
    return rows


def bench_train_step(repeat: int):
    # imported late: the backend override below must land before any conv runs
    from spadesynth.trainer import build_state, draw_batch, ensure_dataset, train_step

    cfg = TrainConfig(
        epochs=1, steps_per_epoch=1, batch_size=4, decay_start_epoch=0, seed=3,
        gen=GeneratorConfig(nf=8, modulation_hidden=16),
        disc=DiscriminatorConfig(nf=8),
        data=DataConfig(root="benchmarks/_bench_data", n_train=16, n_val=4),
    )
    train_ds, _ = ensure_dataset(cfg)
    rows = []
    default = kernels.BACKEND
    for backend in kernels.backends():
        kernels.set_backend(backend)
        state = build_state(cfg)
        bm, bi = draw_batch(state, train_ds)
        train_step(state, bm, bi, 1e-4, 4e-4)  # warm up
        best = float("inf")
        for _ in range(repeat):
            bm, bi = draw_batch(state, train_ds)
            t0 = time.perf_counter()
            train_step(state, bm, bi, 1e-4, 4e-4)
            best = min(best, time.perf_counter() - t0)
        rows.append(("train step 32px nf=8 b=4", backend, best))
    kernels.set_backend(default)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    print(f"available backends: {', '.join(kernels.backends())}")
    print(f"default backend: {kernels.BACKEND}\n")
    rows = bench_kernels(args.repeat) + bench_train_step(args.repeat)

    width = max(len(r[0]) for r in rows)
    print(f"{'case':<{width}} {'backend':>8} {'best':>12}")
    print("-" * (width + 22))
    base = {}
    for label, backend, secs in rows:
        note = ""
        if backend == "python":
            base[label] = secs
        elif label in base and secs > 0:
            note = f"  ({base[label] / secs:.1f}x vs python)"
        print(f"{label:<{width}} {backend:>8} {secs * 1e3:>10.3f}ms{note}")


if __name__ == "__main__":
    main()
