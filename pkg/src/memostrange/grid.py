"""Uniform tensor grids on boxes, storing interior nodes only.

Homogeneous Dirichlet data is built into every operator, so boundary nodes
are never materialized: an axis split into m cells carries m-1 unknowns.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Axis-aligned box split into cells_per_axis uniform cells per axis."""

    dim: int
    cells_per_axis: int
    extent: tuple[tuple[float, float], ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.cells_per_axis < 2:
            raise ValueError("cells_per_axis must be >= 2")
        extent = self.extent
        if extent is None:
            extent = ((0.0, 1.0),) * self.dim
        extent = tuple((float(lo), float(hi)) for lo, hi in extent)
        if len(extent) != self.dim:
            raise ValueError(f"extent has {len(extent)} axes, expected {self.dim}")
        for lo, hi in extent:
            if not hi > lo:
                raise ValueError(f"degenerate extent [{lo}, {hi}]")
        object.__setattr__(self, "extent", extent)

    @property
    def h(self) -> np.ndarray:
        """Cell width per axis."""
        return np.array([(hi - lo) / self.cells_per_axis for lo, hi in self.extent])

    @property
    def shape(self) -> tuple[int, ...]:
        """Interior node counts per axis."""
        return (self.cells_per_axis - 1,) * self.dim

    @property
    def n_interior(self) -> int:
        return (self.cells_per_axis - 1) ** self.dim

    def axis_coords(self, ax: int) -> np.ndarray:
        """Interior node coordinates along one axis."""
        lo, hi = self.extent[ax]
        h = (hi - lo) / self.cells_per_axis
        return lo + h * np.arange(1, self.cells_per_axis)

    def meshgrid(self) -> list[np.ndarray]:
        """Interior node coordinates as dim arrays of shape self.shape."""
        return list(np.meshgrid(*(self.axis_coords(ax) for ax in range(self.dim)), indexing="ij"))

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """Discrete L2 inner product, h^dim weighted."""
        return float(self.h.prod()) * float(np.dot(np.ravel(a), np.ravel(b)))

    def norm_l2(self, a: np.ndarray) -> float:
        return float(np.sqrt(self.inner(a, a)))


@dataclass
class Field:
    """Scalar nodal values on a grid's interior, stored flat."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        if self.values.size != self.grid.n_interior:
            raise ValueError(
                f"field has {self.values.size} values, grid has {self.grid.n_interior} interior nodes"
            )

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.n_interior))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "Field":
        """Sample fn(*coords) at the interior nodes."""
        return cls(grid, np.asarray(fn(*grid.meshgrid()), dtype=np.float64).ravel())

    def reshaped(self) -> np.ndarray:
        """Values viewed with the grid's tensor shape."""
        return self.values.reshape(self.grid.shape)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def norm_l2(self) -> float:
        return self.grid.norm_l2(self.values)

    def norm_max(self) -> float:
        return float(np.max(np.abs(self.values)))
