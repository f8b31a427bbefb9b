"""Model descriptions for planar articulated systems.

Coordinate conventions used throughout the package:

* The world is the x-z plane; gravity pulls along -z and flat ground is the
  line z = 0.
* A model is a kinematic tree of rigid links. Body ``-1`` is the world.
  With a planar floating base, body 0 is the base link and its pose is the
  first three configuration entries ``(x, z, theta)``; joint ``j`` then
  drives body ``j + 1``. Fixed-base models have no base entries and joint
  ``j`` drives body ``j``.
* The configuration vector is ``q = [base pose?] + [joint positions]`` and
  the velocity vector ``v`` shares the layout, so ``nq == nv``. The packed
  state is ``x = [q, v]``.
* Controls are position targets for the actuated joints, tracked by the
  per-joint PD controller embedded in the dynamics.

Every link frame has its origin at the link's inboard joint; ``length``
points along the local +x axis and is used for default attachment points
and rendering. Angles are measured counter-clockwise from world +x.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

import numpy as np
import numpy.typing as npt

from ..errors import ConfigError, DimensionError

FloatArray = npt.NDArray[np.float64]

REVOLUTE = "revolute"
PRISMATIC = "prismatic"


@dataclass(frozen=True)
class ContactParams:
    """Soft ground-contact parameters.

    ``slip_stiffness`` scales the tangential (friction) regularization
    relative to the normal spring; raising it makes stance feet grip harder
    at the price of stiffer dynamics and therefore more integrator substeps.
    ``smoothing_width`` is the vertical thickness of the force blending zone,
    which keeps the contact force C1 in the state.
    """

    normal_stiffness: float = 2.0e4
    normal_damping: float = 300.0
    friction_coeff: float = 1.0
    slip_stiffness: float = 10.0
    smoothing_width: float = 0.005

    def __post_init__(self) -> None:
        for name in ("normal_stiffness", "normal_damping", "friction_coeff",
                     "slip_stiffness", "smoothing_width"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"ContactParams.{name} must be > 0")
        if not 0.0 < self.friction_coeff <= 2.0:
            raise ConfigError("ContactParams.friction_coeff must lie in (0, 2]")
        if self.slip_stiffness < 1.0:
            raise ConfigError("ContactParams.slip_stiffness must be >= 1")


@dataclass(frozen=True)
class LinkSpec:
    name: str
    mass: float
    inertia: float
    length: float
    com: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if not self.mass > 0.0:
            raise ConfigError(f"link '{self.name}': mass must be > 0")
        if not self.inertia > 0.0:
            raise ConfigError(f"link '{self.name}': inertia must be > 0")
        if self.length < 0.0:
            raise ConfigError(f"link '{self.name}': length must be >= 0")


@dataclass(frozen=True)
class JointSpec:
    """One joint of the tree, including its embedded PD actuator.

    ``parent`` is the parent body index (-1 for the world). ``anchor`` is the
    attachment point in the parent frame. ``ref`` is a fixed frame offset:
    revolute joints add it to the joint angle, prismatic joints rotate the
    child frame by it. Unactuated joints must carry zero PD gains and do not
    appear in the control vector.
    """

    name: str
    kind: str
    parent: int
    anchor: tuple[float, float] = (0.0, 0.0)
    axis: tuple[float, float] = (1.0, 0.0)
    ref: float = 0.0
    limits: tuple[float, float] = (-1.0e9, 1.0e9)
    damping: float = 0.0
    kp: float = 0.0
    kd: float = 0.0
    torque_limit: float = 1.0e9
    actuated: bool = True

    def __post_init__(self) -> None:
        if self.kind not in (REVOLUTE, PRISMATIC):
            raise ConfigError(f"joint '{self.name}': unknown kind '{self.kind}'")
        if self.kp < 0.0 or self.kd < 0.0:
            raise ConfigError(f"joint '{self.name}': PD gains must be >= 0")
        if self.damping < 0.0:
            raise ConfigError(f"joint '{self.name}': damping must be >= 0")
        if not self.torque_limit > 0.0:
            raise ConfigError(f"joint '{self.name}': torque_limit must be > 0")
        if not self.limits[0] < self.limits[1]:
            raise ConfigError(f"joint '{self.name}': limits must be ordered")
        if self.kind == PRISMATIC:
            norm = float(np.hypot(*self.axis))
            if not np.isclose(norm, 1.0, atol=1e-9):
                raise ConfigError(f"joint '{self.name}': axis must be a unit vector")
        if self.actuated and self.kp == 0.0 and self.kd == 0.0:
            raise ConfigError(f"joint '{self.name}': actuated joint needs PD gains")


@dataclass(frozen=True)
class ContactPoint:
    body: int
    offset: tuple[float, float]


@dataclass(frozen=True)
class Marker:
    """Named point of interest on a body (e.g. the tracking 'head')."""

    body: int
    offset: tuple[float, float]


@dataclass(frozen=True)
class ModelSpec:
    """Immutable description of a planar articulated system.

    Instances are safe to share across threads; all simulation entry points
    are pure functions of (spec, state, control).
    """

    name: str
    links: tuple[LinkSpec, ...]
    joints: tuple[JointSpec, ...]
    floating_base: bool
    contact_points: tuple[ContactPoint, ...] = ()
    contact: ContactParams = field(default_factory=ContactParams)
    gravity: float = 9.81
    markers: dict[str, Marker] = field(default_factory=dict)
    default_q: tuple[float, ...] = ()
    default_targets: tuple[float, ...] = ()
    planner_dt_max: float = 0.02

    def __post_init__(self) -> None:
        n_links = len(self.links)
        n_joints = len(self.joints)
        expected_links = n_joints + (1 if self.floating_base else 0)
        if n_links != expected_links:
            raise ConfigError(
                f"model '{self.name}': {n_links} links but geometry implies "
                f"{expected_links} (one per joint plus the floating base)")
        base = 1 if self.floating_base else 0
        for j, joint in enumerate(self.joints):
            child = base + j
            if not -1 <= joint.parent < child:
                raise ConfigError(
                    f"model '{self.name}': joint '{joint.name}' parent "
                    f"{joint.parent} must precede its child body {child}")
            if not self.floating_base and joint.parent == -1 and j > 0:
                pass  # multiple world-rooted joints are allowed
        for cp in self.contact_points:
            if not 0 <= cp.body < n_links:
                raise ConfigError(
                    f"model '{self.name}': contact point body {cp.body} out of range")
        for name, marker in self.markers.items():
            if not 0 <= marker.body < n_links:
                raise ConfigError(
                    f"model '{self.name}': marker '{name}' body out of range")
        if self.default_q and len(self.default_q) != self.nq:
            raise ConfigError(
                f"model '{self.name}': default_q has {len(self.default_q)} "
                f"entries, expected {self.nq}")
        if self.default_targets and len(self.default_targets) != self.nu:
            raise ConfigError(
                f"model '{self.name}': default_targets has "
                f"{len(self.default_targets)} entries, expected {self.nu}")
        if not self.gravity >= 0.0:
            raise ConfigError(f"model '{self.name}': gravity must be >= 0")

    # Layout -----------------------------------------------------------------

    @property
    def base_dim(self) -> int:
        return 3 if self.floating_base else 0

    @property
    def n_bodies(self) -> int:
        return len(self.links)

    @property
    def nq(self) -> int:
        return self.base_dim + len(self.joints)

    @property
    def nv(self) -> int:
        return self.nq

    @property
    def nx(self) -> int:
        return 2 * self.nq

    @property
    def nu(self) -> int:
        return len(self.actuated_joints)

    @property
    def actuated_joints(self) -> tuple[int, ...]:
        return tuple(j for j, joint in enumerate(self.joints) if joint.actuated)

    def joint_dof(self, j: int) -> int:
        """Configuration index of joint j."""
        return self.base_dim + j

    def body_of_joint(self, j: int) -> int:
        return (1 if self.floating_base else 0) + j

    # State helpers ----------------------------------------------------------

    def default_state(self) -> FloatArray:
        q = np.array(self.default_q, dtype=float) if self.default_q \
            else np.zeros(self.nq)
        return np.concatenate([q, np.zeros(self.nv)])

    def home_control(self) -> FloatArray:
        """PD targets that hold the default pose against gravity."""
        if self.default_targets:
            return np.array(self.default_targets, dtype=float)
        q = np.array(self.default_q, dtype=float) if self.default_q \
            else np.zeros(self.nq)
        return q[[self.joint_dof(j) for j in self.actuated_joints]]

    def split_state(self, x: FloatArray) -> tuple[FloatArray, FloatArray]:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.nx:
            raise DimensionError(
                f"state has {x.shape[-1]} entries, model '{self.name}' expects {self.nx}")
        return x[..., :self.nq], x[..., self.nq:]

    def joint_positions(self, x: FloatArray) -> FloatArray:
        q, _ = self.split_state(x)
        return q[..., self.base_dim:]

    def check_control(self, u: FloatArray) -> FloatArray:
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.nu:
            raise DimensionError(
                f"control has {u.shape[-1]} entries, model '{self.name}' expects {self.nu}")
        return u

    def control_limits(self) -> tuple[FloatArray, FloatArray]:
        lo = np.array([self.joints[j].limits[0] for j in self.actuated_joints])
        hi = np.array([self.joints[j].limits[1] for j in self.actuated_joints])
        return lo, hi

    def with_contact(self, **kwargs) -> "ModelSpec":
        """Copy of this model with updated contact parameters."""
        return replace(self, contact=replace(self.contact, **kwargs))


# Model files -----------------------------------------------------------------


class _MarkedLoader:
    """yaml.SafeLoader subclass factory that records source line numbers."""


def _build_marked_loader():
    import yaml

    class Loader(yaml.SafeLoader):
        pass

    def construct_mapping(loader, node, deep=False):
        mapping = yaml.SafeLoader.construct_mapping(loader, node, deep=deep)
        mapping["__line__"] = node.start_mark.line + 1
        return mapping

    Loader.add_constructor(
        yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, construct_mapping)
    return Loader


def _pop_line(d: dict) -> int:
    return d.pop("__line__", 0)


def _take(d: dict, key: str, line: int, path: str, default=_MarkedLoader):
    if key in d:
        return d.pop(key)
    if default is not _MarkedLoader:
        return default
    raise ConfigError(f"line {line}: {path} is missing required field '{key}'")


def _pair(value, line: int, path: str) -> tuple[float, float]:
    try:
        a, b = value
        return float(a), float(b)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"line {line}: {path} must be a pair of numbers") from exc


def _build(line: int, factory, /, **kwargs):
    """Construct a spec dataclass, prefixing invariant errors with the line."""
    try:
        return factory(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"line {line}: {exc}") from None


def load_model(path_or_text, name_hint: str = "<model>") -> ModelSpec:
    """Parse a YAML model document, validating invariants with line context."""
    import yaml

    if hasattr(path_or_text, "read"):
        text = path_or_text.read()
    else:
        import os
        if isinstance(path_or_text, (str, bytes)) and os.path.exists(path_or_text):
            name_hint = str(path_or_text)
            with open(path_or_text, "r", encoding="utf-8") as fh:
                text = fh.read()
        else:
            text = path_or_text

    try:
        doc = yaml.load(text, Loader=_build_marked_loader())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{name_hint}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{name_hint}: model document must be a mapping")

    line = _pop_line(doc)
    try:
        name = _take(doc, "name", line, "model")
        floating = bool(_take(doc, "floating_base", line, "model"))
        gravity = float(_take(doc, "gravity", line, "model", 9.81))
        planner_dt_max = float(_take(doc, "planner_dt_max", line, "model", 0.02))

        links = []
        for i, entry in enumerate(_take(doc, "links", line, "model")):
            lline = _pop_line(entry)
            links.append(_build(
                lline, LinkSpec,
                name=str(_take(entry, "name", lline, f"links[{i}]", f"link{i}")),
                mass=float(_take(entry, "mass", lline, f"links[{i}]")),
                inertia=float(_take(entry, "inertia", lline, f"links[{i}]")),
                length=float(_take(entry, "length", lline, f"links[{i}]")),
                com=_pair(_take(entry, "com", lline, f"links[{i}]", (0.0, 0.0)),
                          lline, f"links[{i}].com"),
            ))
            if entry:
                raise ConfigError(
                    f"line {lline}: links[{i}] has unknown fields {sorted(entry)}")

        joints = []
        for i, entry in enumerate(_take(doc, "joints", line, "model", [])):
            jline = _pop_line(entry)
            path = f"joints[{i}]"
            joints.append(_build(
                jline, JointSpec,
                name=str(_take(entry, "name", jline, path, f"joint{i}")),
                kind=str(_take(entry, "kind", jline, path)),
                parent=int(_take(entry, "parent", jline, path)),
                anchor=_pair(_take(entry, "anchor", jline, path, (0.0, 0.0)),
                             jline, f"{path}.anchor"),
                axis=_pair(_take(entry, "axis", jline, path, (1.0, 0.0)),
                           jline, f"{path}.axis"),
                ref=float(_take(entry, "ref", jline, path, 0.0)),
                limits=_pair(_take(entry, "limits", jline, path, (-1e9, 1e9)),
                             jline, f"{path}.limits"),
                damping=float(_take(entry, "damping", jline, path, 0.0)),
                kp=float(_take(entry, "kp", jline, path, 0.0)),
                kd=float(_take(entry, "kd", jline, path, 0.0)),
                torque_limit=float(_take(entry, "torque_limit", jline, path, 1e9)),
                actuated=bool(_take(entry, "actuated", jline, path, True)),
            ))
            if entry:
                raise ConfigError(
                    f"line {jline}: {path} has unknown fields {sorted(entry)}")

        contacts = []
        for i, entry in enumerate(_take(doc, "contact_points", line, "model", [])):
            cline = _pop_line(entry)
            contacts.append(ContactPoint(
                body=int(_take(entry, "body", cline, f"contact_points[{i}]")),
                offset=_pair(_take(entry, "offset", cline, f"contact_points[{i}]"),
                             cline, f"contact_points[{i}].offset"),
            ))

        contact_cfg = _take(doc, "contact", line, "model", None)
        if contact_cfg is not None:
            cline = _pop_line(contact_cfg)
            contact = _build(cline, ContactParams,
                             **{k: float(v) for k, v in contact_cfg.items()})
        else:
            contact = ContactParams()

        markers = {}
        for mname, entry in _take(doc, "markers", line, "model", {}).items():
            if mname == "__line__":
                continue
            mline = _pop_line(entry)
            markers[mname] = Marker(
                body=int(_take(entry, "body", mline, f"markers.{mname}")),
                offset=_pair(_take(entry, "offset", mline, f"markers.{mname}"),
                             mline, f"markers.{mname}.offset"),
            )

        default_q = tuple(float(v) for v in _take(doc, "default_q", line, "model", ()))
        default_targets = tuple(
            float(v) for v in _take(doc, "default_targets", line, "model", ()))
        if doc:
            raise ConfigError(
                f"line {line}: model has unknown fields {sorted(doc)}")

        return ModelSpec(
            name=name, links=tuple(links), joints=tuple(joints),
            floating_base=floating, contact_points=tuple(contacts),
            contact=contact, gravity=gravity, markers=markers,
            default_q=default_q, default_targets=default_targets,
            planner_dt_max=planner_dt_max)
    except ConfigError as exc:
        raise ConfigError(f"{name_hint}: {exc}") from None
