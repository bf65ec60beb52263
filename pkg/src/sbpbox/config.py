"""Flat key=value run configuration.

Grammar: one `key = value` pair per line, `#` starts a comment, blank lines
ignored.  Keys use section dots (`domain.dim`, `coupling.kind`,
`boundary.h1.x0`, ...).  There is no expression language: the coupling comes
from a builtin family or a tabulated field file, boundary data are constants
or per-face tabulated files (`file:path`).  Unknown keys are errors so typos
cannot silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .grid import FACE_NAMES, BoundaryData, Grid
from .optimize import OptimizerOptions
from .problem import CouplingSpec, Problem, build_problem
from .solvers import LinearSolveOptions

__all__ = ["RunConfig", "load_config", "parse_config_text", "CONFIG_KEYS"]

_MODES = ("ground", "excited", "verify", "refine", "oracle")
_COUPLING_PARAM_KEYS = ("a", "b", "base", "height", "radius", "center",
                        "amplitude", "cycles", "tilt", "file")

# key -> (parser, default); None default means "required" for the few keys
# that have no sensible fallback.
CONFIG_KEYS = {
    "domain.dim": ("int", None),
    "domain.lengths": ("floats", None),
    "grid.n": ("ints", None),
    "physics.kappa": ("float", 1.0),
    "physics.p": ("float", 3.0),
    "coupling.kind": ("str", None),
    "solver.rel_tolerance": ("float", 1e-10),
    "solver.max_iterations": ("int", 0),
    "solver.preconditioner": ("str", "diagonal"),
    "optimizer.metric": ("str", "h10"),
    "optimizer.grad_tol": ("float", 1e-7),
    "optimizer.max_iterations": ("int", 5000),
    "optimizer.initial_step": ("float", 1.0),
    "optimizer.dedupe_l2": ("float", 1e-3),
    "optimizer.dedupe_j": ("float", 1e-6),
    "optimizer.samples_per_family": ("int", 2),
    "run.mode": ("str", "ground"),
    "run.k": ("int", 3),
    "run.seed": ("int", 0),
    "run.grids": ("ints", (65, 129, 257)),
    "output.dir": ("str", "out"),
    "output.dump_fields": ("bool", True),
}


def _parse_scalar(kind: str, key: str, raw: str):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if raw.lower() in ("true", "yes", "1", "on"):
                return True
            if raw.lower() in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind == "ints":
            return tuple(int(tok) for tok in raw.split(","))
        if kind == "floats":
            return tuple(float(tok) for tok in raw.split(","))
        return raw
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r} as {kind}") from exc


@dataclass
class RunConfig:
    """Parsed configuration; ``build_problem`` assembles the Problem lazily."""

    values: dict = field(default_factory=dict)
    coupling_params: dict = field(default_factory=dict)
    boundary: dict = field(default_factory=dict)
    source: str = "<memory>"

    def get(self, key: str):
        if key in self.values:
            return self.values[key]
        kind, default = CONFIG_KEYS[key]
        if default is None:
            raise ConfigError(f"missing required key {key!r} in {self.source}")
        return default

    @property
    def mode(self) -> str:
        mode = self.get("run.mode")
        if mode not in _MODES:
            raise ConfigError(f"key 'run.mode': unknown mode {mode!r}")
        return mode

    def grid(self) -> Grid:
        dim = self.get("domain.dim")
        if "domain.lengths" in self.values:
            lengths = self.values["domain.lengths"]
        else:
            lengths = (1.0,) * dim
        if len(lengths) == 1 and dim > 1:
            lengths = lengths * dim
        n = self.get("grid.n")
        if len(n) == 1 and dim > 1:
            n = n * dim
        if len(lengths) != dim or len(n) != dim:
            raise ConfigError(
                f"domain.lengths/grid.n must have {dim} entries, got "
                f"{lengths} and {n}"
            )
        return Grid(lengths=tuple(lengths), n=tuple(n))

    def coupling(self) -> CouplingSpec:
        kind = self.get("coupling.kind")
        params = dict(self.coupling_params)
        if "file" in params:
            params["path"] = params.pop("file")
        if "center" in params and not isinstance(params["center"], tuple):
            params["center"] = (params["center"],)
        return CouplingSpec(kind=kind, params=params)

    def boundary_data(self, which: str, grid: Grid) -> BoundaryData:
        values = {}
        for (axis, side) in grid.faces():
            face_name = _face_name(axis, side)
            spec = self.boundary.get((which, face_name))
            if spec is None:
                values[(axis, side)] = np.zeros(grid.face_shape(axis))
            elif isinstance(spec, float):
                values[(axis, side)] = np.full(grid.face_shape(axis), spec)
            else:
                face_vals = np.loadtxt(spec, comments="#", ndmin=1)
                shape = grid.face_shape(axis)
                if face_vals.size != int(np.prod(shape)):
                    raise ConfigError(
                        f"boundary.{which}.{face_name}: file {spec!r} has "
                        f"{face_vals.size} values, face needs {int(np.prod(shape))}"
                    )
                values[(axis, side)] = face_vals.reshape(shape)
        # Reject keys naming faces that do not exist in this dimension.
        for (w, face_name) in self.boundary:
            if w == which and face_name not in _face_names_for(grid.dim):
                raise ConfigError(
                    f"boundary.{which}.{face_name}: no such face in "
                    f"{grid.dim}d"
                )
        return BoundaryData(grid=grid, values=values)

    def solver_options(self) -> LinearSolveOptions:
        max_it = self.get("solver.max_iterations")
        return LinearSolveOptions(
            rel_tolerance=self.get("solver.rel_tolerance"),
            max_iterations=(max_it if max_it > 0 else None),
            preconditioner=self.get("solver.preconditioner"),
        )

    def optimizer_options(self, seed: int | None = None) -> OptimizerOptions:
        return OptimizerOptions(
            metric=self.get("optimizer.metric"),
            grad_tol=self.get("optimizer.grad_tol"),
            max_iterations=self.get("optimizer.max_iterations"),
            initial_step=self.get("optimizer.initial_step"),
            dedupe_l2=self.get("optimizer.dedupe_l2"),
            dedupe_j=self.get("optimizer.dedupe_j"),
            samples_per_family=self.get("optimizer.samples_per_family"),
            seed=(self.get("run.seed") if seed is None else seed),
        )

    def build_problem(self, n_override=None) -> Problem:
        grid = self.grid()
        if n_override is not None:
            n = (int(n_override),) * grid.dim if np.isscalar(n_override) else tuple(n_override)
            grid = Grid(lengths=grid.lengths, n=n)
        h1 = self.boundary_data("h1", grid)
        h2 = self.boundary_data("h2", grid)
        return build_problem(
            grid=grid, coupling=self.coupling(), h1=h1, h2=h2,
            kappa=self.get("physics.kappa"), p=self.get("physics.p"),
            solver=self.solver_options(),
        )


def _face_name(axis: int, side: int) -> str:
    for name, (a, s) in FACE_NAMES.items():
        if (a, s) == (axis, side):
            return name
    raise KeyError((axis, side))


def _face_names_for(dim: int) -> tuple[str, ...]:
    return tuple(name for name, (a, _) in FACE_NAMES.items() if a < dim)


def parse_config_text(text: str, source: str = "<memory>") -> RunConfig:
    cfg = RunConfig(source=source)
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {raw_line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if not raw:
            raise ConfigError(f"{source}:{lineno}: key {key!r} has empty value")
        if key in CONFIG_KEYS:
            kind, _ = CONFIG_KEYS[key]
            if key in cfg.values:
                raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
            cfg.values[key] = _parse_scalar(kind, key, raw)
        elif key.startswith("coupling."):
            param = key[len("coupling."):]
            if param not in _COUPLING_PARAM_KEYS:
                raise ConfigError(f"{source}:{lineno}: unknown coupling parameter {key!r}")
            if param == "file":
                cfg.coupling_params[param] = raw
            elif param in ("center",):
                cfg.coupling_params[param] = _parse_scalar("floats", key, raw)
            elif param == "cycles":
                cfg.coupling_params[param] = _parse_scalar("float", key, raw)
            else:
                cfg.coupling_params[param] = _parse_scalar("float", key, raw)
        elif key.startswith("boundary.h1.") or key.startswith("boundary.h2."):
            _, which, face_name = key.split(".", 2)
            if face_name not in FACE_NAMES:
                raise ConfigError(f"{source}:{lineno}: unknown face in key {key!r}")
            if raw.startswith("file:"):
                cfg.boundary[(which, face_name)] = raw[len("file:"):].strip()
            else:
                cfg.boundary[(which, face_name)] = _parse_scalar("float", key, raw)
        else:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return parse_config_text(text, source=str(path))
