"""Pure Python/numpy implementations of the hot loops.

Used when the compiled extension is unavailable or ``PDTS_PURE=1``.
Formula programs are postfix arrays of (opcode, operand) int32 pairs; see
``logic.compile_formulas``.  World ``w`` assigns atom ``i`` the bit
``(w >> (n_atoms - 1 - i)) & 1`` so worlds enumerate lexicographically.
"""

from __future__ import annotations

import numpy as np

OP_ATOM, OP_NOT, OP_AND, OP_OR, OP_IMPLIES, OP_TRUE, OP_FALSE = range(7)


def _atom_columns(n_atoms: int) -> np.ndarray:
    w = np.arange(1 << n_atoms, dtype=np.int64)
    shifts = np.arange(n_atoms - 1, -1, -1, dtype=np.int64)
    return ((w[None, :] >> shifts[:, None]) & 1).astype(bool)


def eval_all(code: np.ndarray, offsets: np.ndarray, n_atoms: int) -> np.ndarray:
    """Truth table of every formula over every world, shape (n_formulas, 2**n_atoms)."""
    cols = _atom_columns(n_atoms)
    n_worlds = 1 << n_atoms
    n_f = len(offsets) - 1
    out = np.empty((n_f, n_worlds), dtype=np.uint8)
    for f in range(n_f):
        stack = []
        for k in range(offsets[f], offsets[f + 1]):
            op, arg = int(code[k, 0]), int(code[k, 1])
            if op == OP_ATOM:
                stack.append(cols[arg])
            elif op == OP_TRUE:
                stack.append(np.ones(n_worlds, dtype=bool))
            elif op == OP_FALSE:
                stack.append(np.zeros(n_worlds, dtype=bool))
            elif op == OP_NOT:
                stack.append(~stack.pop())
            else:
                b, a = stack.pop(), stack.pop()
                if op == OP_AND:
                    stack.append(a & b)
                elif op == OP_OR:
                    stack.append(a | b)
                else:
                    stack.append(~a | b)
        out[f] = stack.pop()
    return out


def world_log_weights(code, offsets, lw_sat, lw_unsat, n_atoms: int) -> np.ndarray:
    """Sum over formulas of ``lw_sat[i]`` if satisfied else ``lw_unsat[i]``, per world."""
    table = eval_all(code, offsets, n_atoms).astype(bool)
    out = np.zeros(1 << n_atoms, dtype=np.float64)
    for i in range(table.shape[0]):
        out += np.where(table[i], lw_sat[i], lw_unsat[i])
    return out


def walk(offsets, cum, targets, leaf_of, root: int, uniforms: np.ndarray) -> np.ndarray:
    """Walk a compiled transition graph once per row of ``uniforms``.

    Node ``v`` with ``leaf_of[v] >= 0`` is terminal; otherwise its
    alternatives occupy ``offsets[v]:offsets[v+1]`` with cumulative
    probabilities ``cum``.  Returns leaf hit counts.
    """
    n, depth = uniforms.shape
    n_leaves = int(leaf_of.max()) + 1 if len(leaf_of) else 0
    node = np.full(n, root, dtype=np.int64)
    max_deg = int(np.max(np.diff(offsets))) if len(offsets) > 1 else 0
    for j in range(depth):
        active = leaf_of[node] < 0
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        v = node[idx]
        start, end = offsets[v], offsets[v + 1]
        u = uniforms[idx, j]
        k = start.copy()
        for _ in range(max_deg - 1):
            k += ((k + 1 < end) & (cum[k] <= u)).astype(np.int64)
        node[idx] = targets[k]
    if (leaf_of[node] < 0).any():
        raise RuntimeError("walk did not reach a leaf within the drawn depth")
    return np.bincount(leaf_of[node], minlength=n_leaves).astype(np.int64)
