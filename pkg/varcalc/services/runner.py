"""
Problem runner: builds the numerical objects of a ProblemSpec, dispatches to the solver
family of its kind and reports a trajectory with a summary of conserved-quantity drifts.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Union
import csv
import logging

import numpy as np

from varcalc.config import SolverConfig, resolve_config
from varcalc.exceptions import ExprSyntaxError, SpecError
from varcalc.models.core import AlgebroidStructure, ControlField, ScalarField
from varcalc.models.discrete import DiscreteControlSystem
from varcalc.models.groupoid import GroupoidElement, GroupoidModel, LieGroupModel
from varcalc.models.states import VakonomicState
from varcalc.models.trajectory import Trajectory
from varcalc.schemas.schemas import ProblemSpec, RunSummary, StructureSpec
from varcalc.services import continuous, discrete, expressions, groupoid, structures

logger = logging.getLogger(__name__)

GROUPOID_KINDS = ("pair_groupoid", "so3_group", "abelian_group")


@dataclass(frozen=True)
class RunResult:
    trajectory: Trajectory
    summary: RunSummary


def _field(text: Optional[str], dims: Mapping[str, int], key: str) -> ScalarField:
    """Compile an expression; time is only an argument when the expression uses it."""
    if text is None:
        raise SpecError(f"problem needs a {key} expression")
    try:
        node = expressions.parse_expr(text, dims)
    except ExprSyntaxError as e:
        err = ExprSyntaxError(f"{key} = {text!r}: {e}")
        err.position = e.position
        raise err from e
    if "t" not in expressions.variables(node):
        dims = {b: d for b, d in dims.items() if b != "t"}
    return expressions.compile_expr(node, dims, name=key)


def _fields(texts: Sequence[str], dims: Mapping[str, int], key: str) -> List[ScalarField]:
    return [_field(text, dims, f"{key}[{i + 1}]") for i, text in enumerate(texts)]


def _vec(values: Sequence[float], size: int, key: str, default: Optional[Sequence[float]] = None) -> np.ndarray:
    if not values and default is not None:
        return np.asarray(default, dtype=float)
    if len(values) != size:
        raise SpecError(f"{key} has {len(values)} entries, expected {size}")
    return np.asarray(values, dtype=float)


def _vector_function(fields: Sequence[ScalarField], **fixed) -> Callable:
    def fn(q):
        return np.array([f(q=q, **fixed) for f in fields])

    return fn


def _control_field(texts: Sequence[str], n: int, k: int) -> ControlField:
    if k < 1:
        raise SpecError("control problems need control_dim >= 1")
    fields = _fields(texts, {"q": n, "u": k}, "control")
    return ControlField(k, lambda q, u: np.array([f(q=q, u=u) for f in fields]))


def _drift(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.max(np.abs(values - values[0]), initial=0.0)) if values.size else 0.0


def _labels(prefix: str, count: int, start: int = 1) -> List[str]:
    return [f"{prefix}{i}" for i in range(start, start + count)]


class RunService:
    @staticmethod
    def apply_overrides(spec: ProblemSpec, dt: Optional[float] = None, t1: Optional[float] = None,
                        steps: Optional[int] = None) -> ProblemSpec:
        """Command-line / request values win over the spec file or catalog defaults."""
        update = {k: v for k, v in (("dt", dt), ("t1", t1), ("steps", steps)) if v is not None}
        return spec.model_copy(update=update) if update else spec

    @staticmethod
    def build_structure(s: StructureSpec) -> AlgebroidStructure:
        if s.kind == "coordinate":
            return structures.coordinate_frame(s.dim or 0)
        if s.kind == "scaled":
            return structures.scaled_frame(s.factors)
        if s.kind == "so3":
            return structures.so3_algebra()
        if s.kind == "martinet":
            return structures.martinet_frame()
        if s.kind == "knife_edge":
            return structures.knife_edge_structure()
        if s.kind == "algebra":
            m = s.dim or 0
            if len(s.constants) != m ** 3:
                raise SpecError(f"algebra of dimension {m} needs {m ** 3} structure constants, got {len(s.constants)}")
            return structures.lie_algebra(m, np.reshape(s.constants, (m, m, m)))
        if s.kind == "frame":
            n = len(s.fields)
            vectors = [_vector_function(_fields(v, {"q": n}, f"fields[{a + 1}]")) for a, v in enumerate(s.fields)]
            return structures.frame_from_vectorfields(vectors)
        if s.kind == "nonholonomic":
            n = s.dim or 0
            vectors = [_vector_function(_fields(v, {"q": n}, f"fields[{a + 1}]")) for a, v in enumerate(s.fields)]
            if s.metric:
                if len(s.metric) != n * n:
                    raise SpecError(f"metric needs {n * n} entries, got {len(s.metric)}")
                entries = _fields(s.metric, {"q": n}, "metric")
                metric = lambda q: np.array([f(q=q) for f in entries]).reshape(n, n)
            else:
                metric = lambda q: np.eye(n)
            return structures.nonholonomic_structure(vectors, metric, n)
        raise SpecError(f"structure {s.kind!r} is a groupoid; it needs a groupoid_del problem")

    @staticmethod
    def build_groupoid(s: StructureSpec) -> Union[GroupoidModel, LieGroupModel]:
        if s.kind == "pair_groupoid":
            return groupoid.pair_groupoid(s.dim or 0)
        if s.kind == "so3_group":
            return groupoid.so3_group()
        if s.kind == "abelian_group":
            return groupoid.abelian_group(s.dim or 0)
        raise SpecError(f"groupoid_del problems need a groupoid structure, got {s.kind!r}")

    @staticmethod
    def run(spec: ProblemSpec, config: Optional[SolverConfig] = None) -> RunResult:
        config = resolve_config(config)
        runner = _RUNNERS[spec.kind]
        logger.info(f"running {spec.kind} problem {spec.name or '<unnamed>'}")
        trajectory, drifts = runner(spec, config)
        summary = RunSummary(name=spec.name, kind=spec.kind, samples=len(trajectory), drifts=drifts)
        logger.info(summary.line())
        return RunResult(trajectory, summary)

    @staticmethod
    def write_csv(trajectory: Trajectory, path: Union[str, Path]) -> None:
        """Header `t` (or `k`) plus labels; floats at full round-trip precision."""
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow([trajectory.time_label, *trajectory.labels])
            for t, row in zip(trajectory.times, trajectory.states):
                writer.writerow([repr(float(t)), *(repr(float(x)) for x in row)])

    @staticmethod
    def read_csv(path: Union[str, Path]) -> Trajectory:
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
        if not rows:
            raise SpecError(f"{path}: empty trajectory file")
        header, body = rows[0], rows[1:]
        data = np.array([[float(x) for x in row] for row in body], dtype=float).reshape(len(body), len(header))
        return Trajectory(data[:, 0], data[:, 1:], tuple(header[1:]), time_label=header[0])


def _algebroid_dims(spec: ProblemSpec):
    S = RunService.build_structure(spec.structure)
    return S, S.base_dim, S.fiber_rank


def _run_lagrangian(spec: ProblemSpec, config: SolverConfig):
    S, n, m = _algebroid_dims(spec)
    if spec.kind == "euler_poincare" and n != 0:
        raise SpecError("euler_poincare problems need a Lie algebra structure")
    L = _field(spec.lagrangian, {"t": 1, "q": n, "y": m}, "lagrangian")
    traj = continuous.integrate_hamel(S, L, _vec(spec.q0, n, "q0"), _vec(spec.y0, m, "y0"),
                                      spec.t1, spec.t0, spec.dt, config)
    Q, Y = traj.block("q"), traj.block("y")
    drifts = {}
    if "t" not in L.arity:
        E = continuous.lagrangian_energy(L, config)
        drifts["energy_drift"] = _drift([E(q=q, y=y) for q, y in zip(Q, Y)])
    if spec.structure.kind == "so3":
        drifts["casimir_drift"] = _drift([np.linalg.norm(L.grad("y", config, q=q, y=y)) for q, y in zip(Q, Y)])
    return traj, drifts


def _run_hamiltonian(spec: ProblemSpec, config: SolverConfig):
    S, n, m = _algebroid_dims(spec)
    if spec.kind == "lie_poisson" and n != 0:
        raise SpecError("lie_poisson problems need a Lie algebra structure")
    H = _field(spec.hamiltonian, {"t": 1, "q": n, "p": m}, "hamiltonian")
    traj = continuous.integrate_hamilton(S, H, _vec(spec.q0, n, "q0"), _vec(spec.p0, m, "p0"),
                                         spec.t1, spec.t0, spec.dt, config)
    Q, P = traj.block("q"), traj.block("p")
    drifts = {}
    if "t" not in H.arity:
        drifts["energy_drift"] = _drift([H(q=q, p=p) for q, p in zip(Q, P)])
    if spec.structure.kind == "so3":
        drifts["casimir_drift"] = _drift(np.linalg.norm(P, axis=1))
    return traj, drifts


def _run_vakonomic(spec: ProblemSpec, config: SolverConfig):
    S, n, m = _algebroid_dims(spec)
    r = len(spec.constraints)
    free = m - r
    if free < 0:
        raise SpecError(f"{r} constraints for a fiber of rank {m}")
    dims = {"t": 1, "q": n, "y": free}
    l = _field(spec.lagrangian, dims, "lagrangian")
    phi = _fields(spec.constraints, dims, "constraints")
    state0 = VakonomicState(_vec(spec.q0, n, "q0"), _vec(spec.y0, free, "y0"), _vec(spec.mu0, r, "mu0", np.zeros(r)))
    traj = continuous.integrate_vakonomic(S, l, phi, state0, spec.t1, spec.t0, spec.dt, config)
    drifts = {f"{label}_drift": _drift(traj.column(label)) for label in traj.labels if label.startswith("mu")}
    return traj, drifts


def _run_pontryagin(spec: ProblemSpec, config: SolverConfig):
    S, n, m = _algebroid_dims(spec)
    k = spec.control_dim
    gamma = _control_field(spec.control, n, k)
    L = _field(spec.cost, {"q": n, "u": k}, "cost")
    qT = _vec(spec.qT, n, "qT") if spec.terminal == "fixed" else None
    traj = continuous.pontryagin_shooting(S, gamma, L, _vec(spec.q0, n, "q0"), spec.t1 - spec.t0, qT=qT,
                                          dt=spec.dt, config=config)
    traj = Trajectory(traj.times + spec.t0, traj.states, traj.labels)
    Q, MU, U = traj.block("q"), traj.block("mu"), traj.block("u")
    stationarity = [np.max(np.abs(gamma.jac_u(q, u, config).T @ mu - L.grad("u", config, q=q, u=u)))
                    for q, mu, u in zip(Q, MU, U)]
    running = np.array([L(q=q, u=u) for q, u in zip(Q, U)])
    cost = float(np.sum(0.5 * (running[1:] + running[:-1]) * np.diff(traj.times)))
    terminal = MU[-1] if qT is None else Q[-1] - qT
    return traj, {"cost": cost, "stationarity_max": float(max(stationarity)),
                  "terminal_defect": float(np.max(np.abs(terminal), initial=0.0))}


def _discrete_setup(spec: ProblemSpec):
    S, n, _ = _algebroid_dims(spec)
    if S.base_dim != S.fiber_rank or spec.structure.kind not in ("coordinate",):
        raise SpecError("discrete problems live on Q x Q with a coordinate structure")
    if spec.steps < 1:
        raise SpecError("discrete problems need steps >= 1")
    L = _field(spec.lagrangian, {"q": n, "y": n}, "lagrangian")
    Ld = discrete.midpoint_lagrangian(L, spec.h, n, name=spec.name)
    q0 = _vec(spec.q0, n, "q0")
    q1 = _vec(spec.q1, n, "q1") if spec.q1 else q0 + spec.h * _vec(spec.y0, n, "y0")
    return n, L, Ld, q0, q1


def _discrete_energy(L: ScalarField, configs: np.ndarray, h: float, config: SolverConfig) -> float:
    E = continuous.lagrangian_energy(L, config)
    return _drift([E(q=0.5 * (a + b), y=(b - a) / h) for a, b in zip(configs[:-1], configs[1:])])


def _index_trajectory(columns: np.ndarray, labels: Sequence[str]) -> Trajectory:
    return Trajectory(np.arange(columns.shape[0], dtype=float), columns, tuple(labels), time_label="k")


def _run_discrete_el(spec: ProblemSpec, config: SolverConfig):
    n, L, Ld, q0, q1 = _discrete_setup(spec)
    path = discrete.del_solve(Ld, q0, q1, spec.steps, config)
    sigma = path.configs
    momenta = [-Ld.D1(sigma[0], sigma[1], config)]
    momenta += [discrete.discrete_momentum(Ld, a, b, config) for a, b in zip(sigma[:-1], sigma[1:])]
    momenta = np.array(momenta)
    traj = _index_trajectory(np.hstack([sigma, momenta]), _labels("q", n) + _labels("p", n))
    return traj, {"momentum_drift": float(np.max(np.abs(momenta - momenta[0]), initial=0.0)),
                  "energy_drift": _discrete_energy(L, sigma, spec.h, config)}


def _run_discrete_constrained(spec: ProblemSpec, config: SolverConfig):
    n, L, Ld, q0, q1 = _discrete_setup(spec)
    phi = [discrete.midpoint_lagrangian(c, spec.h, n, name=c.name)
           for c in _fields(spec.constraints, {"q": n, "y": n}, "constraints")]
    path = discrete.discrete_constrained_solve(Ld, phi, q0, q1, spec.steps, config=config)
    sigma = path.configs
    r = len(phi)
    feasibility = [abs(c(a, b)) for a, b in zip(sigma[1:-1], sigma[2:]) for c in phi]
    traj = _index_trajectory(np.hstack([sigma, path.multipliers]), _labels("q", n) + _labels("lambda", r))
    return traj, {"constraint_max": float(max(feasibility, default=0.0)),
                  "energy_drift": _discrete_energy(L, sigma, spec.h, config)}


def _run_discrete_ocp(spec: ProblemSpec, config: SolverConfig):
    S, n, _ = _algebroid_dims(spec)
    k = spec.control_dim
    gamma = _control_field(spec.control, n, k)
    if len(spec.control) != n:
        raise SpecError(f"discrete control map needs {n} components, got {len(spec.control)}")
    sys = DiscreteControlSystem(n, gamma, _field(spec.cost, {"q": n, "u": k}, "cost"))
    q0 = _vec(spec.q0, n, "q0")
    qN = _vec(spec.qT, n, "qT") if spec.terminal == "fixed" else None
    path, controls, costates = discrete.discrete_ocp_solve(sys, q0, spec.steps, qN, config)
    N = spec.steps
    U = np.vstack([controls, np.full((1, k), np.nan)])
    MU = np.vstack([np.full((1, n), np.nan), costates])
    traj = _index_trajectory(np.hstack([path.configs, U, MU]), _labels("q", n) + _labels("u", k) + _labels("mu", n))
    residual = discrete.discrete_ocp_residual(sys, q0, N, path.configs[1:], costates, controls, qN, config)
    return traj, {"cost": discrete.rollout_cost(sys, q0, controls),
                  "residual_max": float(np.max(np.abs(residual), initial=0.0))}


def _run_groupoid(spec: ProblemSpec, config: SolverConfig):
    model = RunService.build_groupoid(spec.structure)
    G = model.group if isinstance(model, LieGroupModel) else model
    n, m = G.base_dim, G.fiber_dim
    dims = {"q": n, "v": m}
    Ld = _field(spec.lagrangian, dims, "lagrangian")
    phi = _fields(spec.constraints, dims, "constraints")
    v0 = _vec(spec.v0, m, "v0")
    N = spec.steps

    if isinstance(model, LieGroupModel) and not phi:
        seq = groupoid.discrete_euler_poincare_solve(model, Ld, v0, N, config)
        V, MU = seq.all_steps(), seq.all_momenta()
        traj = _index_trajectory(np.hstack([V, MU]), _labels("v", m) + _labels("mu", m))
        update = [np.max(np.abs(MU[j + 1] - groupoid.lie_poisson_update(model, V[j], MU[j]))) for j in range(N)]
        drifts = {"update_defect": float(max(update, default=0.0))}
        if spec.structure.kind == "so3_group":
            drifts["casimir_drift"] = _drift(np.linalg.norm(MU, axis=1))
        return traj, drifts

    g = GroupoidElement(_vec(spec.q0, n, "q0"), v0)
    elements, lams = [g], [np.zeros(len(phi))]
    for _ in range(N):
        if phi:
            g, lam = groupoid.groupoid_constrained_step(G, Ld, phi, g, lams[-1], config=config)
            lams.append(lam)
        else:
            g = groupoid.groupoid_del_step(G, Ld, g, config=config)
        elements.append(g)
    columns = [np.array([e.q for e in elements]).reshape(N + 1, n), np.array([e.v for e in elements])]
    labels = _labels("q", n) + _labels("v", m)
    drifts = {}
    if phi:
        columns.append(np.array(lams).reshape(N + 1, len(phi)))
        labels += _labels("lambda", len(phi))
        drifts["constraint_max"] = float(max((abs(c(q=e.q, v=e.v)) for e in elements[1:] for c in phi), default=0.0))
    else:
        residuals = [np.max(np.abs(groupoid.groupoid_del_residual(G, Ld, a, b, config)), initial=0.0)
                     for a, b in zip(elements[:-1], elements[1:])]
        drifts["residual_max"] = float(max(residuals, default=0.0))
    return _index_trajectory(np.hstack(columns), labels), drifts


_RUNNERS = {
    "lagrangian": _run_lagrangian,
    "euler_poincare": _run_lagrangian,
    "hamiltonian": _run_hamiltonian,
    "lie_poisson": _run_hamiltonian,
    "vakonomic": _run_vakonomic,
    "pontryagin": _run_pontryagin,
    "discrete_el": _run_discrete_el,
    "discrete_constrained": _run_discrete_constrained,
    "discrete_ocp": _run_discrete_ocp,
    "groupoid_del": _run_groupoid,
}
