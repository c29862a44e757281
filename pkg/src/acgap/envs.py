"""FourRoom gridworld and small MDP generators."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .mdp import TabularMdp
from .rng import make_rng

# 11x11 interior of the classic four-rooms map; '#' wall, '.' free.
FOURROOM_ROWS = (
    ".....#.....",
    ".....#.....",
    "...........",
    ".....#.....",
    ".....#.....",
    "#.####.....",
    ".....###.##",
    ".....#.....",
    ".....#.....",
    "...........",
    ".....#.....",
)
DEFAULT_GOAL = (1, 9)
ACTIONS = ("up", "down", "left", "right")
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))


@dataclass(frozen=True)
class FourRoomSpec:
    grid: tuple = FOURROOM_ROWS
    goal_cell: tuple = DEFAULT_GOAL
    episode_length: int = 300
    gamma: float = 0.9
    actions: tuple = field(default=ACTIONS)

    def __post_init__(self):
        rows = tuple(str(r) for r in self.grid)
        object.__setattr__(self, "grid", rows)
        object.__setattr__(self, "goal_cell", tuple(int(x) for x in self.goal_cell))
        if len({len(r) for r in rows}) != 1:
            raise ValueError("grid rows must have equal length")
        if any(set(r) - {".", "#", "G"} for r in rows):
            raise ValueError("grid may only contain '.', '#' and 'G'")
        gi, gj = self.goal_cell
        if not (0 <= gi < len(rows) and 0 <= gj < len(rows[0])) or rows[gi][gj] == "#":
            raise ValueError(f"goal {self.goal_cell} is not a free cell")
        if self.episode_length < 1:
            raise ValueError("episode_length must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        free = set(self.free_cells())
        seen, frontier = {self.goal_cell}, [self.goal_cell]
        while frontier:
            i, j = frontier.pop()
            for di, dj in MOVES:
                nb = (i + di, j + dj)
                if nb in free and nb not in seen:
                    seen.add(nb)
                    frontier.append(nb)
        if seen != free:
            raise ValueError("some free cells cannot reach the goal")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.grid), len(self.grid[0])

    def is_free(self, i: int, j: int) -> bool:
        h, w = self.shape
        return 0 <= i < h and 0 <= j < w and self.grid[i][j] != "#"

    def free_cells(self) -> list[tuple[int, int]]:
        h, w = self.shape
        return [(i, j) for i in range(h) for j in range(w) if self.grid[i][j] != "#"]

    def render(self) -> list[str]:
        gi, gj = self.goal_cell
        rows = [r.replace("G", ".") for r in self.grid]
        rows[gi] = rows[gi][:gj] + "G" + rows[gi][gj + 1:]
        return rows

    def to_json(self) -> str:
        return json.dumps({"grid": self.render(), "episode_length": self.episode_length,
                           "gamma": self.gamma})

    @classmethod
    def from_json(cls, text: str) -> "FourRoomSpec":
        data = json.loads(text)
        rows = data["grid"]
        goals = [(i, r.index("G")) for i, r in enumerate(rows) if "G" in r]
        if len(goals) != 1:
            raise ValueError("grid must contain exactly one 'G'")
        return cls(grid=tuple(r.replace("G", ".") for r in rows), goal_cell=goals[0],
                   episode_length=data.get("episode_length", 300), gamma=data.get("gamma", 0.9))


def fourroom_mdp(spec: FourRoomSpec = FourRoomSpec()) -> TabularMdp:
    """Deterministic FourRoom MDP over free cells (row-major order).

    Bumping into a wall or the border leaves the agent in place. The reward
    is 1 for any move that lands on the goal (including staying on it) and 0
    otherwise; the goal is not absorbing.
    """
    cells = spec.free_cells()
    index = {c: k for k, c in enumerate(cells)}
    S, A = len(cells), len(MOVES)
    P = np.zeros((S * A, S))
    r = np.zeros(S * A)
    goal = index[spec.goal_cell]
    for (i, j), s in index.items():
        for a, (di, dj) in enumerate(MOVES):
            nxt = (i + di, j + dj)
            s2 = index[nxt] if spec.is_free(*nxt) else s
            P[s * A + a, s2] = 1.0
            r[s * A + a] = 1.0 if s2 == goal else 0.0
    mu0 = np.full(S, 1.0 / S)
    return TabularMdp(S, A, P, r, mu0, spec.gamma)


def random_mdp(n_states: int, n_actions: int, seed: int, reward_scale: float = 1.0,
               gamma: float = 0.9) -> TabularMdp:
    """Dirichlet(1) transition rows, uniform rewards in ``[-scale, scale]``, uniform ``mu0``."""
    if n_states < 1 or n_actions < 1:
        raise ValueError("n_states and n_actions must be >= 1")
    rng = make_rng(seed, 0xD1)
    P = rng.dirichlet(np.ones(n_states), size=n_states * n_actions)
    P /= P.sum(axis=1, keepdims=True)
    r = rng.uniform(-reward_scale, reward_scale, size=n_states * n_actions)
    mu0 = np.full(n_states, 1.0 / n_states)
    return TabularMdp(n_states, n_actions, P, r, mu0, gamma)


def two_state_cycle(gamma: float = 0.9) -> TabularMdp:
    """s0 -> s1 -> s0 with a single action, starting in s0."""
    P = np.array([[0.0, 1.0], [1.0, 0.0]])
    return TabularMdp(2, 1, P, [0.0, 0.0], [1.0, 0.0], gamma)


def bandit(rewards, gamma: float = 0.9) -> TabularMdp:
    """One-state MDP whose actions pay ``rewards``."""
    rewards = np.asarray(rewards, dtype=float)
    A = len(rewards)
    return TabularMdp(1, A, np.ones((A, 1)), rewards, [1.0], gamma)
