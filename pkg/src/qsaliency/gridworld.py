"""Deterministic gridworld with an exact Q-table solved by value iteration.

Serves as a fully controlled oracle for tests and demos: transitions are
deterministic, walls bounce (the agent stays put), and goal/pit cells are
absorbing with their reward granted on entry.  The world's features are
its cells; the perturbation for a cell turns it into a wall, removing the
affordance it provided.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .core import Combiner, QProfile, ScoreBreakdown, sarfa_score

FLOOR = "."
WALL = "#"
GOAL = "G"
PIT = "P"

ACTIONS = ("up", "down", "left", "right")
_DELTAS = {"up": (0, -1), "down": (0, 1), "left": (-1, 0), "right": (1, 0)}


@dataclass(frozen=True)
class GridWorld:
    """A rectangular grid of cells with one start position.

    ``cells`` is row-major text, one character per cell: ``.`` floor,
    ``#`` wall, ``G`` goal, ``P`` pit.  The outer boundary must be wall;
    the start cell must not be a wall (it may sit on a goal, in which case
    every action immediately re-enters the goal).
    """

    width: int
    height: int
    cells: Tuple[str, ...]
    start: Tuple[int, int]
    discount: float = 0.9
    step_reward: float = 0.0
    goal_reward: float = 1.0
    pit_reward: float = -1.0

    def __post_init__(self) -> None:
        if self.width < 2 or self.height < 2:
            raise ValueError("grid must be at least 2x2")
        if len(self.cells) != self.width * self.height:
            raise ValueError("cells length does not match width*height")
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        for ch in self.cells:
            if ch not in (FLOOR, WALL, GOAL, PIT):
                raise ValueError(f"bad cell {ch!r}")
        if GOAL not in self.cells:
            raise ValueError("world needs at least one goal")
        for x in range(self.width):
            if self.cells[x] != WALL or self.cells[x + self.width * (self.height - 1)] != WALL:
                raise ValueError("outer boundary must be wall")
        for y in range(self.height):
            if self.cells[y * self.width] != WALL or self.cells[y * self.width + self.width - 1] != WALL:
                raise ValueError("outer boundary must be wall")
        sx, sy = self.start
        if not (0 <= sx < self.width and 0 <= sy < self.height):
            raise ValueError("start out of bounds")
        if self.cell(sx, sy) == WALL:
            raise ValueError("start cell must not be a wall")

    @classmethod
    def from_text(cls, text: str, start: Tuple[int, int], **kwargs) -> "GridWorld":
        """Build from a newline-separated block of cell characters."""
        rows = [row.strip() for row in text.strip().splitlines()]
        width = len(rows[0])
        if any(len(row) != width for row in rows):
            raise ValueError("ragged grid text")
        return cls(width=width, height=len(rows), cells=tuple("".join(rows)), start=start, **kwargs)

    def cell(self, x: int, y: int) -> str:
        return self.cells[x + y * self.width]

    def is_terminal(self, x: int, y: int) -> bool:
        return self.cell(x, y) in (GOAL, PIT)

    def walkable_cells(self) -> List[Tuple[int, int]]:
        return [
            (x, y)
            for y in range(self.height)
            for x in range(self.width)
            if self.cell(x, y) != WALL
        ]

    def step(self, x: int, y: int, action: str) -> Tuple[int, int, float]:
        """Deterministic transition: returns (nx, ny, reward)."""
        dx, dy = _DELTAS[action]
        nx, ny = x + dx, y + dy
        if not (0 <= nx < self.width and 0 <= ny < self.height) or self.cell(nx, ny) == WALL:
            nx, ny = x, y  # bounce
        reward = self.step_reward
        landed = self.cell(nx, ny)
        if landed == GOAL:
            reward += self.goal_reward
        elif landed == PIT:
            reward += self.pit_reward
        return nx, ny, reward

    def blank_cell(self, x: int, y: int) -> "GridWorld":
        """Perturbed world with cell (x, y) turned into a wall."""
        cells = list(self.cells)
        cells[x + y * self.width] = WALL
        return GridWorld(
            width=self.width,
            height=self.height,
            cells=tuple(cells),
            start=self.start,
            discount=self.discount,
            step_reward=self.step_reward,
            goal_reward=self.goal_reward,
            pit_reward=self.pit_reward,
        )


QTable = Dict[Tuple[int, int], Dict[str, float]]


def solve_gridworld(world: GridWorld, tolerance: float = 1e-10) -> QTable:
    """Value iteration to a sup-norm residual below ``tolerance``.

    Terminal cells bootstrap with value 0, so entering a goal is worth
    exactly its reward.  Every non-wall cell gets a Q row over the four
    actions (bouncing makes every action available everywhere).
    """
    if tolerance <= 0.0:
        raise ValueError("tolerance must be positive")
    cells = world.walkable_cells()
    # Transitions are static; precompute (next, reward, next-is-terminal).
    transitions = {
        cell: [
            (world.step(cell[0], cell[1], a)[:2], world.step(cell[0], cell[1], a)[2])
            for a in ACTIONS
        ]
        for cell in cells
    }
    nonterminal = [cell for cell in cells if not world.is_terminal(*cell)]
    values = {cell: 0.0 for cell in cells}
    gamma = world.discount
    while True:
        residual = 0.0
        for cell in nonterminal:
            best = max(r + gamma * values[nxt] for nxt, r in transitions[cell])
            diff = best - values[cell]
            residual = max(residual, abs(diff))
            values[cell] = best
        if residual < tolerance:
            break
    table: QTable = {}
    for cell in cells:
        row = {}
        for a, (nxt, reward) in zip(ACTIONS, transitions[cell]):
            row[a] = reward + gamma * values[nxt]
        table[cell] = row
    return table


def bellman_residual(world: GridWorld, table: QTable) -> float:
    """Sup-norm Bellman optimality residual of a Q table, over all cells."""
    worst = 0.0
    for (x, y), row in table.items():
        for a in ACTIONS:
            nx, ny, reward = world.step(x, y, a)
            if world.is_terminal(nx, ny):
                backup = reward
            else:
                backup = reward + world.discount * max(table[(nx, ny)].values())
            worst = max(worst, abs(row[a] - backup))
    return worst


def state_token(x: int, y: int) -> str:
    return f"{x},{y}"


def parse_state_token(token: str) -> Tuple[int, int]:
    parts = token.split(",")
    if len(parts) != 2:
        raise ValueError(f"bad gridworld state token {token!r}")
    return int(parts[0]), int(parts[1])


def q_profile(world: GridWorld, table: QTable, x: int, y: int) -> QProfile:
    """The solved Q row at a cell, as an oracle profile."""
    if (x, y) not in table:
        raise ValueError(f"cell ({x}, {y}) is not walkable")
    row = table[(x, y)]
    return QProfile(state_token(x, y), tuple((a, row[a]) for a in ACTIONS))


def compute_gridworld_saliency(
    world: GridWorld,
    selected_action: Optional[str] = None,
    combiner: Combiner = Combiner.HARMONIC,
    tolerance: float = 1e-10,
) -> Dict[Tuple[int, int], ScoreBreakdown]:
    """Per-cell saliency of the start state's chosen action.

    Each candidate cell (floor or pit; never walls, the start, or goals) is
    blanked into a wall, the perturbed world is re-solved exactly, and the
    original and perturbed Q rows at the start cell are scored.
    """
    table = solve_gridworld(world, tolerance)
    sx, sy = world.start
    q_orig = q_profile(world, table, sx, sy)
    if selected_action is None:
        selected_action = max(ACTIONS, key=lambda a: q_orig.q(a))
    elif selected_action not in ACTIONS:
        raise ValueError(f"unknown action {selected_action!r}")

    scores: Dict[Tuple[int, int], ScoreBreakdown] = {}
    for (x, y) in world.walkable_cells():
        if (x, y) == (sx, sy) or world.cell(x, y) == GOAL:
            continue
        perturbed = world.blank_cell(x, y)
        pert_table = solve_gridworld(perturbed, tolerance)
        q_pert = q_profile(perturbed, pert_table, sx, sy)
        breakdown = sarfa_score(q_orig, q_pert, selected_action, combiner)
        scores[(x, y)] = ScoreBreakdown(
            feature_id=state_token(x, y),
            score=breakdown.score,
            status=breakdown.status,
            delta_p=breakdown.delta_p,
            kl=breakdown.kl,
            k_sim=breakdown.k_sim,
        )
    return scores
