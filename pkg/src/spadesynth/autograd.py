"""Reverse-mode autodiff over dense numpy tensors.

Forward ops append records to a tape (define-by-run); backward walks the
tape in exact reverse construction order, restricted to the ancestors of
the loss so unrelated graph components keep their gradients untouched.
Gradients accumulate across backward calls; zero explicitly between steps.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from .errors import UsageError


class Tensor:
    """Dense array plus gradient slot; immutable once computed."""

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, name=self.name)

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad += g

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{tag})"


class _Record:
    __slots__ = ("op", "out", "inputs", "backfn")

    def __init__(self, op, out, inputs, backfn):
        self.op = op
        self.out = out
        self.inputs = inputs
        self.backfn = backfn


class Tape:
    """Ordered operation records for one forward pass."""

    def __init__(self):
        self.records: list[_Record] = []

    def add(self, op: str, out: Tensor, inputs, backfn) -> None:
        self.records.append(_Record(op, out, inputs, backfn))

    def reset(self) -> None:
        self.records.clear()

    def backward(self, loss: Tensor) -> None:
        if loss.data.size != 1:
            raise UsageError(
                f"backward requires a scalar loss, got shape {loss.data.shape}"
            )
        loss.accumulate_grad(np.ones_like(loss.data))
        # ancestors of the loss, so stale grads on unrelated records are inert
        needed = {id(loss)}
        for rec in reversed(self.records):
            if id(rec.out) in needed:
                for t in rec.inputs:
                    needed.add(id(t))
        for rec in reversed(self.records):
            if id(rec.out) in needed and rec.out.grad is not None:
                rec.backfn(rec.out.grad)


_DEFAULT_TAPE = Tape()
_STACK: list[Tape | None] = [_DEFAULT_TAPE]


def current_tape() -> Tape | None:
    return _STACK[-1]


def recording() -> bool:
    return _STACK[-1] is not None


@contextmanager
def use_tape(tape: Tape):
    _STACK.append(tape)
    try:
        yield tape
    finally:
        _STACK.pop()


@contextmanager
def no_grad():
    _STACK.append(None)
    try:
        yield
    finally:
        _STACK.pop()


def record(op: str, out: Tensor, inputs, backfn) -> None:
    tape = _STACK[-1]
    if tape is not None:
        tape.add(op, out, inputs, backfn)


def backward(loss: Tensor) -> None:
    """Populate grads of everything the loss depends on, on the current tape."""
    tape = _STACK[-1]
    if tape is None:
        raise UsageError("backward called inside no_grad")
    tape.backward(loss)


def grad_check(f, point: Tensor, eps: float = 1e-5, tol: float = 1e-4,
               max_coords: int = 256) -> dict:
    """Compare the analytic gradient of scalar f at `point` to central differences.

    Coordinates are checked exhaustively up to max_coords, then a uniform
    deterministic subset. Returns {max_abs_err, max_rel_err, pass}.
    """
    if eps <= 0:
        raise UsageError("eps must be positive")

    def eval_scalar() -> float:
        with no_grad():
            out = f(point)
        if out.data.size != 1:
            raise UsageError("grad_check requires f to return a scalar")
        return float(out.data.reshape(-1)[0])

    e1, e2 = eval_scalar(), eval_scalar()
    if e1 != e2 and not (np.isnan(e1) and np.isnan(e2)):
        raise UsageError("f is not deterministic: two evaluations disagree")

    saved_grad = point.grad
    point.grad = None
    with use_tape(Tape()) as tape:
        out = f(point)
        tape.backward(out)
    analytic = (
        np.zeros_like(point.data) if point.grad is None else point.grad.copy()
    )
    point.grad = saved_grad

    flat = point.data.reshape(-1)
    n = flat.size
    if n <= max_coords:
        coords = np.arange(n)
    else:
        coords = np.unique(np.linspace(0, n - 1, max_coords).astype(np.int64))

    max_abs = 0.0
    max_rel = 0.0
    a_flat = analytic.reshape(-1)
    for i in coords:
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = eval_scalar()
        flat[i] = orig - eps
        f_minus = eval_scalar()
        flat[i] = orig
        numeric = (f_plus - f_minus) / (2.0 * eps)
        err = abs(a_flat[i] - numeric)
        max_abs = max(max_abs, err)
        denom = max(abs(a_flat[i]), abs(numeric))
        if denom > 1e-6:
            max_rel = max(max_rel, err / denom)
    return {"max_abs_err": max_abs, "max_rel_err": max_rel,
            "pass": bool(max_rel <= tol)}
