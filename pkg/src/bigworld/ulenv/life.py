"""Conway's Game of Life (B3/S23) on the unbounded grid, stored sparsely."""
from __future__ import annotations

import re
from collections import Counter
from pathlib import Path
from typing import Iterable

import numpy as np

from .markov import LocalRule, MarkovState

ALIVE = 1
DEAD = 0
MOORE = tuple((dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if dx or dy)


def _life_transition(cell, neighbours):
    n = sum(1 for v in neighbours if v == ALIVE)
    return ALIVE if n == 3 or (n == 2 and cell == ALIVE) else DEAD


def _life_batch(grids):
    """B3/S23 on a stack of dense 0/1 grids with wrap-around edges."""
    g = grids.astype(np.int16)
    n = sum(np.roll(np.roll(g, dx, 1), dy, 2) for dx, dy in MOORE)
    return ((n == 3) | ((n == 2) & (g == 1))).astype(np.int8)


LIFE = LocalRule(MOORE, _life_transition, (DEAD, ALIVE), DEAD, "life", _life_batch)

# Reference glider frames at t, t+1, t+2 around a highlighted centre cell:
# (x, y) of each filled square, y pointing up.
GLIDER_FRAMES = (
    frozenset({(1, 3), (2, 2), (3, 2), (1, 1), (2, 1)}),
    frozenset({(2, 3), (1, 2), (1, 1), (2, 1), (3, 1)}),
    frozenset({(3, 2), (1, 2), (1, 1), (2, 1), (2, 0)}),
)
GLIDER_CENTER = (2, 2)


def life_state(cells: Iterable) -> MarkovState:
    return MarkovState.from_cells(cells, ALIVE, DEAD)


def life_step(state) -> MarkovState:
    """One synchronous B3/S23 update. Accepts a state or an iterable of live cells."""
    live = state.cells() if isinstance(state, MarkovState) else frozenset(state)
    counts = Counter((x + dx, y + dy) for x, y in live for dx, dy in MOORE)
    nxt = [c for c, n in counts.items() if n == 3 or (n == 2 and c in live)]
    out = life_state(nxt)
    assert len(out) <= 9 * len(live)
    return out


def life_run(state, steps: int) -> list[MarkovState]:
    frames = [state if isinstance(state, MarkovState) else life_state(state)]
    for _ in range(steps):
        frames.append(life_step(frames[-1]))
    return frames


# pattern files


def parse_cells(text: str) -> frozenset:
    """Coordinate list: one ``x y`` pair per line, ``#`` starts a comment."""
    cells = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'x y', got {line!r}")
        cells.add((int(parts[0]), int(parts[1])))
    return frozenset(cells)


def format_cells(cells: Iterable) -> str:
    return "".join(f"{x} {y}\n" for x, y in sorted(cells))


_RLE_TOKEN = re.compile(r"(\d*)([bo$!])")


def parse_rle(text: str) -> frozenset:
    """Standard Life RLE. Rows run downward, so y decreases with each ``$``."""
    body = []
    for line in text.splitlines():
        s = line.strip()
        if not s or s.startswith("#") or s.lower().startswith("x"):
            continue
        body.append(s)
    data = "".join(body)
    cells = set()
    x = y = 0
    pos = 0
    for m in _RLE_TOKEN.finditer(data):
        if data[pos:m.start()].strip():
            raise ValueError(f"bad RLE near {data[pos:m.start()]!r}")
        pos = m.end()
        n = int(m.group(1) or 1)
        tag = m.group(2)
        if tag == "b":
            x += n
        elif tag == "o":
            cells.update((x + i, y) for i in range(n))
            x += n
        elif tag == "$":
            y -= n
            x = 0
        else:
            break
    return frozenset(cells)


def format_rle(cells: Iterable) -> str:
    cells = set(cells)
    if not cells:
        return "x = 0, y = 0, rule = B3/S23\n!\n"
    xs = [c[0] for c in cells]
    ys = [c[1] for c in cells]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    rows = []
    for y in range(y1, y0 - 1, -1):
        runs = []
        row = "".join("o" if (x, y) in cells else "b" for x in range(x0, x1 + 1)).rstrip("b")
        for m in re.finditer(r"o+|b+", row):
            n = len(m.group())
            runs.append(f"{n if n > 1 else ''}{m.group()[0]}")
        rows.append("".join(runs))
    body = "$".join(rows) + "!"
    return f"x = {x1 - x0 + 1}, y = {y1 - y0 + 1}, rule = B3/S23\n{body}\n"


def load_pattern(path) -> frozenset:
    text = Path(path).read_text()
    if Path(path).suffix.lower() == ".rle" or re.search(r"^\s*x\s*=", text, re.M):
        return parse_rle(text)
    return parse_cells(text)
