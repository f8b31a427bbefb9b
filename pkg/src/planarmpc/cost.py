"""Residual-based task costs: weighted norms of named residual terms.

A cost is a sum over terms ``w_i * n_i(r_i(x, u, t))`` where the norm
derivatives are analytic and the residual Jacobians come from the same
finite-difference machinery (and epsilon) as the dynamics. Hessians are
Gauss-Newton: second derivatives of the residuals are never formed, so the
per-knot curvature is positive semidefinite by construction.

Residual kinds cover the locomotion staples: torso uprightness and height,
head-position tracking, periodic foot-lift gait references, capture-point
balance, actuator effort, and posture/velocity regularizers. Terms validate
against the bound model at compile time (e.g. a gait term on a contact-free
model is a configuration error).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .derivs import FdConfig, _perturbation_stack
from .dynamics.kinematics import forward_chain, mass_matrix_and_bias
from .dynamics.model import FloatArray, ModelSpec
from .dynamics.simulate import contact_forces, pd_torque
from .errors import ConfigError

# Stance weighting scale for the balance residual: a foot counts as stance
# in proportion N / (N + STANCE_FORCE_REF), smoothing the 1 N threshold.
STANCE_FORCE_REF = 1.0
_BALANCE_FALLBACK_WEIGHT = 1.0e-2
_MIN_COM_HEIGHT = 1.0e-2


class NormKind(str, enum.Enum):
    QUADRATIC = "quadratic"
    SMOOTH_L2 = "smooth_l2"


def norm_value(kind: NormKind, r: FloatArray, c: float) -> float:
    if kind is NormKind.QUADRATIC:
        return 0.5 * float(r @ r)
    rho = np.sqrt(float(r @ r) + c * c)
    return rho - c


def norm_gradient(kind: NormKind, r: FloatArray, c: float) -> FloatArray:
    if kind is NormKind.QUADRATIC:
        return r
    rho = np.sqrt(float(r @ r) + c * c)
    return r / rho


def norm_hessian(kind: NormKind, r: FloatArray, c: float) -> FloatArray:
    n = r.shape[0]
    if kind is NormKind.QUADRATIC:
        return np.eye(n)
    rho = np.sqrt(float(r @ r) + c * c)
    return np.eye(n) / rho - np.outer(r, r) / rho ** 3


@dataclass(frozen=True)
class ResidualTerm:
    """One weighted residual term of the cost."""

    kind: str
    weight: float
    norm: NormKind = NormKind.QUADRATIC
    smooth_c: float = 0.01
    name: str = ""
    params: tuple[tuple[str, object], ...] = ()

    def __post_init__(self) -> None:
        if self.weight < 0.0:
            raise ConfigError(f"residual '{self.label}': weight must be >= 0")
        if self.norm is NormKind.SMOOTH_L2 and not self.smooth_c > 0.0:
            raise ConfigError(f"residual '{self.label}': smooth_c must be > 0")

    @property
    def label(self) -> str:
        return self.name or self.kind

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    @staticmethod
    def make(kind: str, weight: float, norm: str | NormKind = NormKind.QUADRATIC,
             name: str = "", smooth_c: float = 0.01, **params) -> "ResidualTerm":
        return ResidualTerm(kind=kind, weight=float(weight),
                            norm=NormKind(norm), smooth_c=smooth_c,
                            name=name, params=tuple(sorted(params.items())))


@dataclass(frozen=True)
class CostSpec:
    """Running and terminal residual terms bound to a model's state layout."""

    model: str
    running: tuple[ResidualTerm, ...]
    terminal: tuple[ResidualTerm, ...] = ()

    def __post_init__(self) -> None:
        if not (self.running or self.terminal):
            raise ConfigError("CostSpec needs at least one residual term")
        labels = [t.label for t in self.running] + \
            [t.label + "/terminal" for t in self.terminal]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate residual term names in {labels}")

    def with_weight(self, label: str, weight: float) -> "CostSpec":
        """Copy with one term's weight replaced (matched by label)."""
        found = False

        def swap(terms):
            nonlocal found
            out = []
            for t in terms:
                if t.label == label:
                    out.append(replace(t, weight=float(weight)))
                    found = True
                else:
                    out.append(t)
            return tuple(out)

        spec = CostSpec(self.model, swap(self.running), swap(self.terminal))
        if not found:
            raise ConfigError(f"unknown residual term '{label}'")
        return spec

    def with_param(self, label: str, **params) -> "CostSpec":
        """Copy with params of one term updated (matched by label)."""
        found = False

        def swap(terms):
            nonlocal found
            out = []
            for t in terms:
                if t.label == label:
                    merged = dict(t.params)
                    merged.update(params)
                    out.append(replace(t, params=tuple(sorted(merged.items()))))
                    found = True
                else:
                    out.append(t)
            return tuple(out)

        spec = CostSpec(self.model, swap(self.running), swap(self.terminal))
        if not found:
            raise ConfigError(f"unknown residual term '{label}'")
        return spec

    def term_labels(self) -> list[str]:
        return [t.label for t in self.running + self.terminal]


@dataclass
class CostBreakdown:
    total: float
    per_term: dict[str, float]
    per_knot: FloatArray  # (T+1,), stage costs with the terminal cost last


@dataclass
class CostDerivatives:
    """Gauss-Newton cost expansion. Row T of lx/lxx is the terminal term."""

    lx: FloatArray   # (T+1, nx)
    lu: FloatArray   # (T, nu)
    lxx: FloatArray  # (T+1, nx, nx)
    luu: FloatArray  # (T, nu, nu)
    lux: FloatArray  # (T, nu, nx)


# Residual builders -----------------------------------------------------------
#
# Builders return batched evaluators fn(ctx) -> (B, nr); the context carries
# the perturbation stack and lazily computes shared kinematics once per stack.


class ResidualContext:
    """One batch of (states, controls) at a common knot time, with cached
    chain kinematics shared by every term."""

    def __init__(self, model: ModelSpec, X: FloatArray, U: FloatArray,
                 t: float) -> None:
        self.model = model
        self.X = X
        self.U = U
        self.t = t
        self._chain = None
        self._com = None
        self._feet = None

    @property
    def chain(self):
        if self._chain is None:
            nq = self.model.nq
            self._chain = forward_chain(self.model, self.X[:, :nq],
                                        self.X[:, nq:])
        return self._chain

    @property
    def com(self) -> FloatArray:
        if self._com is None:
            _, _, self._com = mass_matrix_and_bias(self.model, self.chain)
        return self._com

    @property
    def feet(self) -> FloatArray:
        """(B, n_feet, 2) contact point world positions."""
        if self._feet is None:
            self._feet = np.stack(
                [self.chain.point_position(cp.body, cp.offset)
                 for cp in self.model.contact_points], axis=1)
        return self._feet


ResidualFn = Callable[[ResidualContext], FloatArray]


def _require(cond: bool, term: ResidualTerm, model: ModelSpec, what: str) -> None:
    if not cond:
        raise ConfigError(
            f"residual '{term.label}' requires {what}; "
            f"model '{model.name}' does not provide it")


def _build_upright(term: ResidualTerm, model: ModelSpec) -> ResidualFn:
    _require(model.floating_base, term, model, "a floating base")
    target = float(term.param_dict.get("target", 0.0))
    return lambda ctx: ctx.X[:, 2:3] - target


def _build_height(term: ResidualTerm, model: ModelSpec) -> ResidualFn:
    _require(model.floating_base, term, model, "a floating base")
    _require(bool(model.contact_points), term, model, "contact points")
    target = float(term.param_dict["target"])

    def fn(ctx):
        feet_z = ctx.feet[:, :, 1].mean(axis=1)
        return (ctx.X[:, 1] - feet_z - target)[:, None]
    return fn


def _build_position(term: ResidualTerm, model: ModelSpec) -> ResidualFn:
    _require("head" in model.markers, term, model, "a 'head' marker")
    goal = np.asarray(term.param_dict["goal"], dtype=float)
    if goal.shape != (2,):
        raise ConfigError(f"residual '{term.label}': goal must be (x, z)")
    marker = model.markers["head"]
    return lambda ctx: ctx.chain.point_position(marker.body, marker.offset) - goal


def gait_reference(t: float, period: float, duty: float, lift: float,
                   offset: float) -> float:
    """Swing-phase foot height reference: zero in stance, cosine bump in swing."""
    s = (t / period + offset) % 1.0
    if s < duty:
        return 0.0
    w = (s - duty) / (1.0 - duty)
    return lift * float(np.sin(np.pi * w) ** 2)


def _build_gait(term: ResidualTerm, model: ModelSpec) -> ResidualFn:
    _require(bool(model.contact_points), term, model, "contact points")
    p = term.param_dict
    period = float(p["period"])
    duty = float(p.get("duty", 0.6))
    lift = float(p.get("lift", 0.05))
    n_feet = len(model.contact_points)
    default_offsets = tuple(i / n_feet for i in range(n_feet))
    offsets = tuple(float(o) for o in p.get("offsets", default_offsets))
    if not period > 0.0:
        raise ConfigError(f"residual '{term.label}': period must be > 0")
    if not 0.0 < duty < 1.0:
        raise ConfigError(f"residual '{term.label}': duty must be in (0, 1)")
    if len(offsets) != n_feet:
        raise ConfigError(
            f"residual '{term.label}': needs {n_feet} phase offsets")

    def fn(ctx):
        refs = np.array([gait_reference(ctx.t, period, duty, lift, o)
                         for o in offsets])
        return ctx.feet[:, :, 1] - refs
    return fn


def _build_balance(term: ResidualTerm, model: ModelSpec) -> ResidualFn:
    _require(model.floating_base, term, model, "a floating base")
    _require(bool(model.contact_points), term, model, "contact points")
    g = model.gravity
    total_m = sum(l.mass for l in model.links)
    masses = np.array([l.mass for l in model.links])

    def fn(ctx):
        chain = ctx.chain
        com = ctx.com
        com_vx = np.zeros(ctx.X.shape[0])
        for b, link in enumerate(model.links):
            _, _, vel, _ = chain.point(b, np.asarray(link.com))
            com_vx += masses[b] * vel[:, 0]
        com_vx /= total_m
        capture = com[:, 0] + com_vx * np.sqrt(
            np.maximum(com[:, 1], _MIN_COM_HEIGHT) / g)
        forces = contact_forces(model, ctx.X, chain=chain)
        w = forces[:, :, 1] / (forces[:, :, 1] + STANCE_FORCE_REF)
        wsum = w.sum(axis=1) + _BALANCE_FALLBACK_WEIGHT
        support_x = (np.einsum("bf,bf->b", w, ctx.feet[:, :, 0])
                     + _BALANCE_FALLBACK_WEIGHT * com[:, 0]) / wsum
        return (capture - support_x)[:, None]
    return fn


def _build_effort(term: ResidualTerm, model: ModelSpec) -> ResidualFn:
    _require(model.nu >= 1, term, model, "actuated joints")
    return lambda ctx: pd_torque(model, ctx.X, ctx.U)


def _build_posture(term: ResidualTerm, model: ModelSpec) -> ResidualFn:
    _require(model.nu >= 1, term, model, "actuated joints")
    home = np.asarray(term.param_dict.get("home", model.home_control()),
                      dtype=float)
    if home.shape != (model.nu,):
        raise ConfigError(
            f"residual '{term.label}': home must have {model.nu} entries")
    dofs = [model.joint_dof(j) for j in model.actuated_joints]
    return lambda ctx: ctx.X[:, dofs] - home


def _build_angular(term: ResidualTerm, model: ModelSpec) -> ResidualFn:
    _require(model.floating_base, term, model, "a floating base")
    col = model.nq + 2
    return lambda ctx: ctx.X[:, col:col + 1]


def _build_joint_velocity(term: ResidualTerm, model: ModelSpec) -> ResidualFn:
    _require(len(model.joints) >= 1, term, model, "joints")
    dofs = [model.nq + model.joint_dof(j) for j in range(len(model.joints))]
    return lambda ctx: ctx.X[:, dofs]


_LIBRARY: dict[str, Callable[[ResidualTerm, ModelSpec], ResidualFn]] = {
    "upright": _build_upright,
    "height": _build_height,
    "position": _build_position,
    "gait": _build_gait,
    "balance": _build_balance,
    "effort": _build_effort,
    "posture": _build_posture,
    "angular": _build_angular,
    "joint_velocity": _build_joint_velocity,
}

# Terms whose residual reads the control; disallowed in terminal costs.
_CONTROL_DEPENDENT = {"effort"}


def residual_library(model: ModelSpec) -> dict[str, bool]:
    """Kinds available for a model: name -> compiles for this model."""
    out = {}
    probe_params = {
        "height": {"target": 0.5},
        "position": {"goal": (0.0, 0.0)},
        "gait": {"period": 1.0},
    }
    for kind, builder in _LIBRARY.items():
        term = ResidualTerm.make(kind, 1.0, **probe_params.get(kind, {}))
        try:
            builder(term, model)
            out[kind] = True
        except ConfigError:
            out[kind] = False
    return out


@dataclass
class _BoundTerm:
    term: ResidualTerm
    fn: ResidualFn
    sl: slice


class CompiledCost:
    """A CostSpec bound to a model: stacked residual evaluation and the
    Gauss-Newton expansion. Instances are immutable once built; the runtime
    hot-swaps whole CompiledCost objects between plan steps."""

    def __init__(self, spec: CostSpec, model: ModelSpec) -> None:
        if spec.model != model.name:
            raise ConfigError(
                f"cost is for model '{spec.model}', got '{model.name}'")
        self.spec = spec
        self.model = model
        self.nx = model.nx
        self.nu = model.nu
        for t in spec.terminal:
            if t.kind in _CONTROL_DEPENDENT:
                raise ConfigError(
                    f"residual '{t.label}' depends on the control and cannot "
                    f"be a terminal term")
        self.running = self._bind(spec.running)
        self.terminal = self._bind(spec.terminal)
        self.running_dim = self.running[-1].sl.stop if self.running else 0
        self.terminal_dim = self.terminal[-1].sl.stop if self.terminal else 0

    def _bind(self, terms: Sequence[ResidualTerm]) -> list[_BoundTerm]:
        bound, start = [], 0
        probe = ResidualContext(self.model, self.model.default_state()[None],
                                np.zeros((1, self.nu)), 0.0)
        for term in terms:
            if term.kind not in _LIBRARY:
                raise ConfigError(f"unknown residual kind '{term.kind}'")
            fn = _LIBRARY[term.kind](term, self.model)
            dim = fn(probe).shape[1]
            bound.append(_BoundTerm(term, fn, slice(start, start + dim)))
            start += dim
        return bound

    # Stacked residuals --------------------------------------------------------

    def residual_running_batch(self, X: FloatArray, U: FloatArray,
                               t: float) -> FloatArray:
        ctx = ResidualContext(self.model, X, U, t)
        out = np.empty((X.shape[0], self.running_dim))
        for bt in self.running:
            out[:, bt.sl] = bt.fn(ctx)
        return out

    def residual_terminal_batch(self, X: FloatArray, t: float) -> FloatArray:
        ctx = ResidualContext(self.model, X, np.zeros((X.shape[0], self.nu)), t)
        out = np.empty((X.shape[0], self.terminal_dim))
        for bt in self.terminal:
            out[:, bt.sl] = bt.fn(ctx)
        return out

    def residual_running(self, x: FloatArray, u: FloatArray, t: float) -> FloatArray:
        return self.residual_running_batch(x[None], u[None], t)[0]

    def residual_terminal(self, x: FloatArray, t: float) -> FloatArray:
        return self.residual_terminal_batch(x[None], t)[0]

    def _stage_from_stacked(self, bound: list[_BoundTerm], r: FloatArray,
                            per_term: dict[str, float], suffix: str = "") -> float:
        total = 0.0
        for bt in bound:
            val = bt.term.weight * norm_value(bt.term.norm, r[bt.sl],
                                              bt.term.smooth_c)
            per_term[bt.term.label + suffix] = \
                per_term.get(bt.term.label + suffix, 0.0) + val
            total += val
        return total

    # Evaluation ---------------------------------------------------------------

    def stage_cost(self, x: FloatArray, u: FloatArray, t: float
                   ) -> tuple[float, dict[str, float]]:
        per_term: dict[str, float] = {}
        total = self._stage_from_stacked(
            self.running, self.residual_running(x, u, t), per_term)
        return total, per_term

    def evaluate(self, states: FloatArray, controls: FloatArray,
                 times: FloatArray) -> CostBreakdown:
        states = np.asarray(states, dtype=float)
        controls = np.asarray(controls, dtype=float)
        T = controls.shape[0]
        per_term: dict[str, float] = {bt.term.label: 0.0 for bt in self.running}
        per_term.update({bt.term.label + "/terminal": 0.0
                         for bt in self.terminal})
        per_knot = np.zeros(T + 1)
        for t in range(T):
            r = self.residual_running(states[t], controls[t], times[t])
            per_knot[t] = self._stage_from_stacked(self.running, r, per_term)
        if self.terminal:
            r = self.residual_terminal(states[T], times[T])
            per_knot[T] = self._stage_from_stacked(
                self.terminal, r, per_term, "/terminal")
        return CostBreakdown(float(per_knot.sum()), per_term, per_knot)

    # Derivatives --------------------------------------------------------------

    def residual_jacobians(self, x: FloatArray, u: FloatArray, t: float,
                           fd: FdConfig, terminal: bool = False
                           ) -> tuple[FloatArray, FloatArray, FloatArray]:
        """(r, Jx, Ju) of the stacked residual by finite differences."""
        X, U = _perturbation_stack(x, u, fd.epsilon, fd.scheme)
        if terminal:
            R = self.residual_terminal_batch(X, t)
            r0 = R[0] if fd.scheme == "forward" else self.residual_terminal(x, t)
        else:
            R = self.residual_running_batch(X, U, t)
            r0 = R[0] if fd.scheme == "forward" \
                else self.residual_running(x, u, t)
        nr, nx, nu = R.shape[1], x.shape[0], u.shape[0]
        Jx = np.empty((nr, nx))
        Ju = np.empty((nr, nu))
        if fd.scheme == "forward":
            for i in range(nx):
                Jx[:, i] = (R[1 + i] - R[0]) / fd.epsilon
            for j in range(nu):
                Ju[:, j] = (R[1 + nx + j] - R[0]) / fd.epsilon
        else:
            for i in range(nx):
                Jx[:, i] = (R[2 * i] - R[2 * i + 1]) / (2 * fd.epsilon)
            for j in range(nu):
                k = 2 * (nx + j)
                Ju[:, j] = (R[k] - R[k + 1]) / (2 * fd.epsilon)
        return r0, Jx, Ju

    def _accumulate(self, bound: list[_BoundTerm], r: FloatArray,
                    Jx: FloatArray, Ju: Optional[FloatArray],
                    lx, lxx, lu=None, luu=None, lux=None) -> None:
        for bt in bound:
            w = bt.term.weight
            if w == 0.0:
                continue
            ri = r[bt.sl]
            jxi = Jx[bt.sl]
            g = norm_gradient(bt.term.norm, ri, bt.term.smooth_c)
            H = norm_hessian(bt.term.norm, ri, bt.term.smooth_c)
            lx += w * (jxi.T @ g)
            HJx = H @ jxi
            lxx += w * (jxi.T @ HJx)
            if Ju is not None:
                jui = Ju[bt.sl]
                lu += w * (jui.T @ g)
                luu += w * (jui.T @ (H @ jui))
                lux += w * (jui.T @ HJx)

    def derivatives(self, states: FloatArray, controls: FloatArray,
                    times: FloatArray, fd: FdConfig,
                    jacs: Optional[list[tuple[FloatArray, FloatArray, FloatArray]]] = None,
                    ) -> CostDerivatives:
        """Gauss-Newton expansion along a trajectory.

        ``jacs`` optionally supplies per-knot ``(r, Jx, Ju)`` of the stacked
        running residual (e.g. shared with the dynamics FD pass); missing
        entries and the terminal knot are computed here with the same fd
        settings.
        """
        states = np.asarray(states, dtype=float)
        controls = np.asarray(controls, dtype=float)
        T = controls.shape[0]
        nx, nu = self.nx, self.nu
        cd = CostDerivatives(
            lx=np.zeros((T + 1, nx)), lu=np.zeros((T, nu)),
            lxx=np.zeros((T + 1, nx, nx)), luu=np.zeros((T, nu, nu)),
            lux=np.zeros((T, nu, nx)))
        for t in range(T):
            if jacs is not None and jacs[t] is not None:
                r, Jx, Ju = jacs[t]
            else:
                r, Jx, Ju = self.residual_jacobians(
                    states[t], controls[t], times[t], fd)
            self._accumulate(self.running, r, Jx, Ju, cd.lx[t], cd.lxx[t],
                             cd.lu[t], cd.luu[t], cd.lux[t])
        if self.terminal:
            r, Jx, _ = self.residual_jacobians(
                states[T], np.zeros(nu), times[T], fd, terminal=True)
            self._accumulate(self.terminal, r, Jx, None, cd.lx[T], cd.lxx[T])
        return cd


class QuadraticCost:
    """Plain LQ tracking cost, exact derivatives; used by the LQ oracles."""

    def __init__(self, Q: FloatArray, R: FloatArray, Qf: FloatArray,
                 x_goal: Optional[FloatArray] = None) -> None:
        self.Q, self.R, self.Qf = np.asarray(Q), np.asarray(R), np.asarray(Qf)
        self.nx = self.Q.shape[0]
        self.nu = self.R.shape[0]
        self.x_goal = np.zeros(self.nx) if x_goal is None \
            else np.asarray(x_goal, dtype=float)

    def residual_running(self, x, u, t):
        return None  # no shared-FD path; derivatives are analytic

    def evaluate(self, states, controls, times) -> CostBreakdown:
        states = np.asarray(states, dtype=float)
        controls = np.asarray(controls, dtype=float)
        T = controls.shape[0]
        per_knot = np.zeros(T + 1)
        for t in range(T):
            dx = states[t] - self.x_goal
            per_knot[t] = 0.5 * dx @ self.Q @ dx \
                + 0.5 * controls[t] @ self.R @ controls[t]
        dx = states[T] - self.x_goal
        per_knot[T] = 0.5 * dx @ self.Qf @ dx
        total = float(per_knot.sum())
        return CostBreakdown(total, {"state": total}, per_knot)

    def derivatives(self, states, controls, times, fd, jacs=None
                    ) -> CostDerivatives:
        states = np.asarray(states, dtype=float)
        controls = np.asarray(controls, dtype=float)
        T = controls.shape[0]
        cd = CostDerivatives(
            lx=np.zeros((T + 1, self.nx)), lu=np.zeros((T, self.nu)),
            lxx=np.zeros((T + 1, self.nx, self.nx)),
            luu=np.zeros((T, self.nu, self.nu)),
            lux=np.zeros((T, self.nu, self.nx)))
        for t in range(T):
            cd.lx[t] = self.Q @ (states[t] - self.x_goal)
            cd.lu[t] = self.R @ controls[t]
            cd.lxx[t] = self.Q
            cd.luu[t] = self.R
        cd.lx[T] = self.Qf @ (states[T] - self.x_goal)
        cd.lxx[T] = self.Qf
        return cd
