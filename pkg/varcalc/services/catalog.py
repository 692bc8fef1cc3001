"""Named built-in problems, invokable from the command line and the HTTP API."""
from typing import Dict, List
import math

from varcalc.exceptions import UnknownProblemError
from varcalc.schemas.schemas import CatalogEntry, ProblemSpec, StructureSpec

_COORD1 = StructureSpec(kind="coordinate", dim=1)

_PROBLEMS: List[ProblemSpec] = [
    ProblemSpec(
        name="free_particle", kind="lagrangian", description="free particle in the plane, L = |y|^2/2",
        structure=StructureSpec(kind="coordinate", dim=2),
        lagrangian="0.5*(y1^2 + y2^2)", q0=[0.0, 0.0], y0=[1.0, 0.5], t1=1.0,
    ),
    ProblemSpec(
        name="sho", kind="lagrangian", description="harmonic oscillator, q(t) = cos t",
        structure=_COORD1, lagrangian="0.5*y1^2 - 0.5*q1^2", q0=[1.0], y0=[0.0], t1=10.0,
    ),
    ProblemSpec(
        name="scaled_sho", kind="lagrangian", description="harmonic oscillator in the frame Y1 = 2 d/dq",
        structure=StructureSpec(kind="scaled", factors=[2.0]),
        lagrangian="0.5*(2*y1)^2 - 0.5*q1^2", q0=[1.0], y0=[0.0], t1=10.0,
    ),
    ProblemSpec(
        name="pendulum", kind="lagrangian", description="planar pendulum, L = y^2/2 + cos q",
        structure=_COORD1, lagrangian="0.5*y1^2 + cos(q1)", q0=[1.0], y0=[0.0], t1=5.0,
    ),
    ProblemSpec(
        name="pendulum_hamiltonian", kind="hamiltonian", description="planar pendulum, H = p^2/2 - cos q",
        structure=_COORD1, hamiltonian="0.5*p1^2 - cos(q1)", q0=[1.0], p0=[0.0], t1=5.0,
    ),
    ProblemSpec(
        name="knife_edge", kind="lagrangian", description="knife edge on the nonholonomic algebroid of its distribution",
        structure=StructureSpec(kind="knife_edge"),
        lagrangian="0.5*(y1^2 + y2^2)", q0=[0.0, 0.0, 0.0], y0=[1.0, 0.5], t1=2.0,
    ),
    ProblemSpec(
        name="martinet", kind="vakonomic", description="sub-Riemannian Martinet problem, l = (y1^2 + y2^2)/2, y3 = 0",
        structure=StructureSpec(kind="martinet"),
        lagrangian="0.5*(y1^2 + y2^2)", constraints=["0"],
        q0=[0.0, 1.0, 0.0], y0=[1.0, 0.5], mu0=[0.7], t1=1.0,
    ),
    ProblemSpec(
        name="rigid_body", kind="euler_poincare", description="free rigid body, I = diag(1, 2, 3)",
        structure=StructureSpec(kind="so3"),
        lagrangian="0.5*(y1^2 + 2*y2^2 + 3*y3^2)", y0=[1.0, 1.0, 1.0], t1=1.0,
    ),
    ProblemSpec(
        name="so3_lie_poisson", kind="lie_poisson", description="rigid body Lie-Poisson flow, H = p.I^-1 p / 2",
        structure=StructureSpec(kind="so3"),
        hamiltonian="0.5*(p1^2 + p2^2/2 + p3^2/3)", p0=[1.0, 2.0, 3.0], t1=1.0,
    ),
    ProblemSpec(
        name="lq_pontryagin", kind="pontryagin", description="scalar linear-quadratic control, qdot = u, L = (q^2 + u^2)/2",
        structure=_COORD1, control=["u1"], control_dim=1, cost="0.5*(q1^2 + u1^2)",
        q0=[1.0], t1=1.0, dt=0.01,
    ),
    ProblemSpec(
        name="discrete_free_particle", kind="discrete_el", description="midpoint discrete free particle",
        structure=_COORD1, lagrangian="0.5*y1^2", h=0.1, q0=[0.0], q1=[0.1], steps=100,
    ),
    ProblemSpec(
        name="discrete_sho", kind="discrete_el", description="midpoint discrete harmonic oscillator",
        structure=_COORD1, lagrangian="0.5*y1^2 - 0.5*q1^2", h=0.01, q0=[1.0], q1=[math.cos(0.01)], steps=1000,
    ),
    ProblemSpec(
        name="discrete_constant_speed", kind="discrete_constrained",
        description="particle under gravity constrained to unit speed",
        structure=StructureSpec(kind="coordinate", dim=2),
        lagrangian="0.5*(y1^2 + y2^2) - q2", constraints=["y1^2 + y2^2 - 1"],
        h=0.01, q0=[0.0, 0.0], q1=[0.01, 0.0], steps=200,
    ),
    ProblemSpec(
        name="discrete_lqr", kind="discrete_ocp", description="scalar discrete LQR, q' = 1.1 q + 0.1 u",
        structure=_COORD1, control=["1.1*q1 + 0.1*u1"], control_dim=1, cost="0.05*(q1^2 + u1^2)",
        q0=[1.0], steps=20,
    ),
    ProblemSpec(
        name="so3_discrete_lie_poisson", kind="groupoid_del",
        description="discrete rigid body on SO(3) with discrete Lie-Poisson momenta",
        structure=StructureSpec(kind="so3_group"),
        lagrangian="0.5*(v1^2 + 2*v2^2 + 3*v3^2)", v0=[0.1, 0.05, 0.02], steps=100,
    ),
    ProblemSpec(
        name="pair_groupoid_del", kind="groupoid_del", description="midpoint harmonic oscillator on the pair groupoid",
        structure=StructureSpec(kind="pair_groupoid", dim=1),
        lagrangian="5*v1^2 - 0.05*(q1 + 0.5*v1)^2", q0=[1.0], v0=[-0.005], steps=100,
    ),
]

CATALOG: Dict[str, ProblemSpec] = {p.name: p for p in _PROBLEMS}


class CatalogService:
    @staticmethod
    def names() -> List[str]:
        return list(CATALOG)

    @staticmethod
    def entries() -> List[CatalogEntry]:
        return [CatalogEntry(name=p.name, kind=p.kind, description=p.description) for p in CATALOG.values()]

    @staticmethod
    def get(name: str) -> ProblemSpec:
        """Raises UnknownProblemError for an unknown name"""
        try:
            return CATALOG[name]
        except KeyError:
            raise UnknownProblemError(f"no catalog problem named {name!r}; try one of {', '.join(CATALOG)}")
