"""Run configuration and result models shared by the CLI and the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Family = Literal["eps0", "eps1", "kasner", "emd3"]

# default Weyl rectangles, chosen inside the admissible region of each case
_DEFAULT_GRIDS = {
    ("eps1", 1): ((1.0, 2.0), (-0.5, 0.5)),
    ("eps1", -1): ((0.2, 0.4), (-0.2, 0.2)),
    ("eps0", 1): ((1.0, 2.0), (-0.5, 0.5)),
    ("eps0", -1): ((0.5, 1.0), (2.0, 3.0)),
    ("kasner", -1): ((2.0, 3.0), (3.5, 4.5)),
    ("emd3", 1): ((1.5, 2.5), (0.5, 1.5)),
}


class Grid(BaseModel):
    model_config = ConfigDict(extra="forbid")

    x1: tuple[float, float]
    x2: tuple[float, float]
    n: tuple[int, int] = (200, 200)

    @field_validator("n")
    @classmethod
    def _n_positive(cls, n):
        if min(n) < 2:
            raise ValueError("each grid axis needs at least 2 points")
        return n

    @model_validator(mode="after")
    def _ordered(self):
        if not (self.x1[0] < self.x1[1] and self.x2[0] < self.x2[1]):
            raise ValueError("grid extents must be increasing")
        return self


class RunConfig(BaseModel):
    """One run: family and parameters, contour class, grid and optional chart map."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    family: Family = "eps1"
    sigma: Literal[1, -1] = 1
    cls: Literal["i", "ii", "iii", "iv"] = Field("i", alias="class")
    form: Literal["A", "B"] = "A"
    inverse: bool = False
    m: float = 1.0
    omega: float = 1.0
    h1: float = 1.0
    h2: float = 1.0
    P: float = 1.0
    Q: float = 2.0
    kasner_mode: Literal["canonical", "meromorphic"] = "canonical"
    c1: Literal["zero", "regularizing"] = "zero"
    grid: Optional[Grid] = None
    point: Optional[tuple[float, float]] = None
    map: Optional[str] = None
    chart: Optional[Grid] = None
    extension: Optional[Literal["smooth", "jump_1", "jump_2", "jump_3"]] = None
    anchor_value: Optional[float] = None
    perturb: float = 0.0
    seed: int = 0
    tolerances: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="before")
    @classmethod
    def _grid_defaults(cls, data):
        # a grid given only partly (say just n) keeps the default extents
        if isinstance(data, dict) and isinstance(data.get("grid"), dict):
            g = data["grid"]
            key = (data.get("family", "eps1"), int(data.get("sigma", 1)))
            if key in _DEFAULT_GRIDS and ("x1" not in g or "x2" not in g):
                r, v = _DEFAULT_GRIDS[key]
                data = {**data, "grid": {"x1": r, "x2": v, **g}}
        return data

    @model_validator(mode="after")
    def _family_rules(self):
        if self.family == "kasner" and self.sigma != -1:
            raise ValueError("the Kasner family lives at sigma = -1")
        if self.family == "emd3":
            if self.sigma != 1:
                raise ValueError("the EMD family is treated at sigma = +1")
            if not (self.h1 > 0 and self.h2 > 0):
                raise ValueError("h1 and h2 must be positive")
        if self.family in ("eps0", "eps1") and not self.m > 0:
            raise ValueError("m must be positive")
        if self.family == "eps0" and self.cls in ("iii", "iv"):
            raise ValueError("eps = 0 has classes i and ii only")
        if self.extension is not None and (self.family, self.sigma) != ("eps1", -1):
            raise ValueError("interior extensions need family eps1 with sigma = -1")
        if self.map is not None and self.chart is None:
            raise ValueError("a chart grid is required together with a map")
        return self

    def weyl_grid(self) -> Grid:
        if self.grid is not None:
            return self.grid
        r, v = _DEFAULT_GRIDS[(self.family, self.sigma)]
        return Grid(x1=r, x2=v)

    def tol(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))


class RunResult(BaseModel):
    command: str
    exit_code: int = 0
    summary: dict = Field(default_factory=dict)
    warnings: list[str] = Field(default_factory=list)
    files: dict[str, str] = Field(default_factory=dict)


class SweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: RunConfig
    param: Literal["m", "P", "Q", "h1", "h2", "omega"]
    values: list[float]


class ErrorBody(BaseModel):
    error: str
    exit_code: int
