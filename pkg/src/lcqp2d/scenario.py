"""Declarative scenario files: worlds, tasks, noise and success predicates.

Scenarios are TOML documents (key/value plus tables). Everything the
controller module defaults is overridable per scenario. Box-owned contact
points and surfaces are referenced symbolically ("corner:2", "face:-x") so
that shape perturbations drawn per trial propagate into the controller's
world model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:            # Python 3.10
    import tomli as tomllib

from .contact import Body, ContactCandidate, World
from .controller import CollisionLimit, ControllerConfig, TaskAtom, TaskSpec
from .geometry import BoxShape, DiskShape, HalfPlaneShape, Pose2, Surface
from .lcqp import SolverOptions
from .sim import NoiseModel, SimConfig


class ScenarioError(ValueError):
    pass


@dataclass
class SuccessSpec:
    atoms: list
    hold_steps: int = 20
    max_steps: int = 3000

    def satisfied(self, world: World, q: np.ndarray) -> bool:
        for atom, tol in self.atoms:
            err = atom.value(world, q) - atom.ref
            if atom.wrap:
                err = math.remainder(err, 2.0 * math.pi)
            if abs(err) > tol:
                return False
        return True


@dataclass
class Scenario:
    name: str
    raw: dict

    def __post_init__(self):
        self._validate()

    # -- construction --------------------------------------------------------

    def _validate(self):
        raw = self.raw
        if not raw.get("bodies"):
            raise ScenarioError("scenario declares no bodies")
        names = [b["name"] for b in raw["bodies"]]
        if len(set(names)) != len(names):
            raise ScenarioError("duplicate body names")
        for c in raw.get("candidates", ()):
            for key in ("point_body", "surface_body"):
                if c[key] not in names:
                    raise ScenarioError(f"candidate references unknown body {c[key]!r}")
        for a in raw.get("task", {}).get("atoms", ()):
            if a["body"] not in names:
                raise ScenarioError(f"task atom references unknown body {a['body']!r}")
        for a in raw.get("success", {}).get("atoms", ()):
            if a["body"] not in names:
                raise ScenarioError(f"success atom references unknown body {a['body']!r}")
            if float(a.get("tol", 0.05)) <= 0:
                raise ScenarioError("success tolerance must be positive")
        for c in raw.get("collision_limits", ()):
            for key in ("point_body", "surface_body"):
                if c[key] not in names:
                    raise ScenarioError(f"collision limit references unknown body {c[key]!r}")

    def _shape(self, spec: dict, overrides: dict):
        name = spec["name"]
        if name in overrides:
            return overrides[name]
        kind = spec["shape"]
        if kind == "box":
            w, h = spec["size"]
            return BoxShape(float(w), float(h))
        if kind == "disk":
            return DiskShape(float(spec["radius"]))
        if kind == "halfplane":
            return HalfPlaneShape(tuple(spec["normal"]), float(spec["offset"]))
        raise ScenarioError(f"unknown shape kind {kind!r}")

    def build_world(self, shape_overrides: dict = None) -> World:
        """Instantiate the world, optionally with perturbed body shapes."""
        overrides = shape_overrides or {}
        raw = self.raw
        bodies = {}
        ordered = []
        for spec in raw["bodies"]:
            shape = self._shape(spec, overrides)
            pose = Pose2(*[float(v) for v in spec.get("pose", (0.0, 0.0, 0.0))])
            body = Body(
                name=spec["name"],
                shape=shape,
                pose0=pose,
                kind=spec.get("kind", "static"),
                mass=float(spec.get("mass", 0.0)),
                com=tuple(spec.get("com", (0.0, 0.0))),
            )
            bodies[body.name] = body
            ordered.append(body)

        candidates = []
        for i, spec in enumerate(raw.get("candidates", ())):
            pb = bodies[spec["point_body"]]
            sb = bodies[spec["surface_body"]]
            candidates.append(ContactCandidate(
                index=i,
                point_body=pb,
                surface_body=sb,
                surface=self._surface(sb, spec),
                point_local=self._point(pb, spec),
                mu=float(spec.get("mu", 0.5)),
            ))
        return World(ordered, candidates, gravity=float(raw.get("gravity", 9.81)))

    def _point(self, body: Body, spec: dict):
        p = spec.get("point")
        if p is None or p == "disk":
            return None
        if isinstance(p, str):
            if not p.startswith("corner:"):
                raise ScenarioError(f"unknown point reference {p!r}")
            if not isinstance(body.shape, BoxShape):
                raise ScenarioError("corner reference on a non-box body")
            idx = int(p.split(":", 1)[1])
            return body.shape.corners()[idx]
        return np.asarray(p, dtype=float)

    def _surface(self, body: Body, spec: dict) -> Surface:
        from dataclasses import replace as _replace
        s = spec.get("surface")
        if isinstance(s, str):
            if s.startswith("face:"):
                if not isinstance(body.shape, BoxShape):
                    raise ScenarioError("face reference on a non-box body")
                face = body.shape.face(s.split(":", 1)[1])
                if "margin" in spec:
                    face = _replace(face, margin=float(spec["margin"]))
                return face
            raise ScenarioError(f"unknown surface reference {s!r}")
        if s is None:
            if isinstance(body.shape, HalfPlaneShape):
                lo, hi = spec.get("extent", (-math.inf, math.inf))
                return body.shape.surface(float(lo), float(hi))
            raise ScenarioError("candidate needs a surface reference")
        lo, hi = s.get("extent", (-math.inf, math.inf))
        return Surface(normal=tuple(s["normal"]), offset=float(s["offset"]),
                       t_lo=float(lo), t_hi=float(hi),
                       margin=float(s.get("margin", 0.02)))

    # -- controller / sim / task ----------------------------------------------

    def _atom(self, spec: dict) -> TaskAtom:
        return TaskAtom(
            kind=spec["kind"],
            body=spec["body"],
            ref=float(spec.get("ref", 0.0)),
            weight=float(spec.get("weight", 1.0)),
            axis={"x": 0, "y": 1}.get(spec.get("axis", "x"), 0),
            other=spec.get("other"),
        )

    def task(self) -> TaskSpec:
        t = self.raw.get("task", {})
        return TaskSpec(
            atoms=[self._atom(a) for a in t.get("atoms", ())],
            weight_dq=float(t.get("weight_dq", 1.0)),
            weight_force=float(t.get("weight_force", 1e-4)),
            slack_penalty=float(t.get("slack_penalty", 1e4)),
        )

    def controller_config(self, relaxed: bool = True) -> ControllerConfig:
        c = self.raw.get("controller", {})
        limits = [CollisionLimit(point_body=l["point_body"],
                                 point=tuple(l["point"]),
                                 surface_body=l["surface_body"],
                                 margin=float(l.get("margin", 0.02)))
                  for l in self.raw.get("collision_limits", ())]
        solver = SolverOptions()
        for key in ("eps_comp", "eps_kkt", "eps_feas"):
            if key in c:
                setattr(solver, key, float(c[key]))
        return ControllerConfig(
            h=float(c.get("h", 0.01)),
            force_gain=float(c.get("force_gain", 1000.0)),
            v_max_lin=float(c.get("v_max_lin", 0.25)),
            v_max_ang=float(c.get("v_max_ang", 1.2)),
            lambda_max=float(c.get("lambda_max", 100.0)),
            q_min=np.asarray(c["q_min"], dtype=float) if "q_min" in c else None,
            q_max=np.asarray(c["q_max"], dtype=float) if "q_max" in c else None,
            relaxed=relaxed,
            hold_limit=int(c.get("hold_limit", 10)),
            collision_limits=limits,
            solver=solver,
        )

    def sim_config(self) -> SimConfig:
        s = self.raw.get("sim", {})
        c = self.raw.get("controller", {})
        return SimConfig(
            tracking_rate=float(s.get("tracking_rate", 1.0)),
            v_max_lin=float(s.get("v_max_lin", 2.0 * float(c.get("v_max_lin", 0.25)))),
            v_max_ang=float(s.get("v_max_ang", 2.0 * float(c.get("v_max_ang", 1.2)))),
            gap_restore=float(s.get("gap_restore", 0.2)),
            stiffness=float(s.get("stiffness", c.get("force_gain", 1000.0))),
        )

    def success(self) -> SuccessSpec:
        s = self.raw.get("success", {})
        atoms = [(self._atom(a), float(a.get("tol", 0.05))) for a in s.get("atoms", ())]
        return SuccessSpec(atoms=atoms,
                           hold_steps=int(s.get("hold_steps", 20)),
                           max_steps=int(s.get("max_steps", 3000)))

    def noise(self, model_error: float = None, measurement: float = None,
              seed: int = None) -> NoiseModel:
        n = self.raw.get("noise", {})
        return NoiseModel(
            model_error_scale=float(n.get("model_error", 0.0)) if model_error is None else model_error,
            measurement_noise_scale=float(n.get("measurement", 0.0)) if measurement is None else measurement,
            seed=int(n.get("seed", 0)) if seed is None else seed,
        )


def load_scenario(source) -> Scenario:
    """Load a scenario from a path or a catalog name."""
    path = Path(source)
    if not path.suffix:
        ref = resources.files("lcqp2d") / "scenarios" / f"{source}.toml"
        if not ref.is_file():
            raise ScenarioError(f"unknown catalog scenario {source!r}")
        data = tomllib.loads(ref.read_text())
        return Scenario(name=str(source), raw=data)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return Scenario(name=path.stem, raw=data)


def catalog() -> list:
    """Names of the scenarios shipped with the package."""
    out = []
    for item in (resources.files("lcqp2d") / "scenarios").iterdir():
        if item.name.endswith(".toml"):
            out.append(item.name[:-5])
    return sorted(out)
