"""Minimal reverse-mode tape over the primitives in ops.

Values are identified by integer ids. A model forward registers leaves
(inputs, parameters), routes every primitive through the taped wrappers
below, and later asks the tape for gradients. Entries are replayed in
reverse recording order exactly once; a value consumed by several later
ops accumulates its gradient by summation before its own producer runs,
so the walk is a plain reversed loop, not a graph search.

Each wrapper also works without a tape (tape=None) for inference-only
forwards: it just computes and returns (value, None).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import ops


class Tape:
    """Ordered record of primitive applications."""

    def __init__(self):
        self._entries: list[tuple[str, tuple[int, ...], int, Callable]] = []
        self._n_ids = 0

    def leaf(self) -> int:
        """Register an independent value (input or parameter)."""
        self._n_ids += 1
        return self._n_ids - 1

    def record(self, op: str, input_ids: Sequence[int], backward: Callable) -> int:
        """Append one application; backward(upstream) -> grad per input."""
        out_id = self.leaf()
        self._entries.append((op, tuple(input_ids), out_id, backward))
        return out_id

    def __len__(self) -> int:
        return len(self._entries)

    def gradients(self, seeds: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
        """Reverse replay from the seeded outputs; returns grads by id.

        Ids never reached by any seed are simply absent from the result.
        """
        grads: dict[int, np.ndarray] = dict(seeds)
        for _op, input_ids, out_id, backward in reversed(self._entries):
            upstream = grads.get(out_id)
            if upstream is None:
                continue
            for vid, g in zip(input_ids, backward(upstream)):
                if vid in grads:
                    grads[vid] = grads[vid] + g
                else:
                    grads[vid] = g
        return grads


def affine(tape, x, x_id, weight, w_id, bias, b_id):
    out = ops.affine_forward(x, weight, bias)
    if tape is None:
        return out, None

    def backward(upstream):
        return ops.affine_backward(upstream, x, weight)

    return out, tape.record("affine", (x_id, w_id, b_id), backward)


def avgpool1d(tape, x, x_id, kernel, stride, padding=0):
    out = ops.avgpool1d_forward(x, kernel, stride, padding)
    if tape is None:
        return out, None
    length = x.shape[-1]

    def backward(upstream):
        return (ops.avgpool1d_backward(upstream, length, kernel, stride, padding),)

    return out, tape.record("avgpool1d", (x_id,), backward)


def concat(tape, a, a_id, b, b_id):
    out = ops.concat_forward(a, b)
    if tape is None:
        return out, None
    split = a.shape[-1]

    def backward(upstream):
        return ops.concat_backward(upstream, split)

    return out, tape.record("concat", (a_id, b_id), backward)
