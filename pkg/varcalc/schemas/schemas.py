from pydantic import BaseModel, Field, model_validator
from typing import Optional, List, Dict, Literal

ProblemKind = Literal[
    "lagrangian", "hamiltonian", "vakonomic", "pontryagin", "discrete_el", "discrete_constrained",
    "discrete_ocp", "groupoid_del", "euler_poincare", "lie_poisson",
]

StructureKind = Literal[
    "coordinate", "scaled", "frame", "nonholonomic", "algebra", "so3", "martinet", "knife_edge",
    "pair_groupoid", "so3_group", "abelian_group",
]


class StructureSpec(BaseModel):
    kind: StructureKind = "coordinate"
    dim: Optional[int] = Field(None, ge=0)
    factors: List[float] = []
    fields: List[List[str]] = []  # frame / distribution vectors, one expression per base coordinate
    metric: List[str] = []  # n*n row-major expressions; identity when empty
    constants: List[float] = []  # m^3 entries C[c][a][b], row-major


class ProblemSpec(BaseModel):
    name: str = ""
    description: str = ""
    kind: ProblemKind
    structure: StructureSpec = StructureSpec()

    lagrangian: Optional[str] = None
    hamiltonian: Optional[str] = None
    constraints: List[str] = []
    control: List[str] = []
    cost: Optional[str] = None
    control_dim: int = Field(0, ge=0)

    q0: List[float] = []
    y0: List[float] = []
    p0: List[float] = []
    mu0: List[float] = []
    q1: List[float] = []
    v0: List[float] = []
    qT: List[float] = []
    terminal: Literal["free", "fixed"] = "free"

    t0: float = 0.0
    t1: float = Field(1.0, gt=0)
    dt: Optional[float] = Field(None, gt=0)
    h: float = Field(0.1, gt=0)
    steps: int = Field(10, ge=0)

    @model_validator(mode="after")
    def check_terminal(self):
        if self.terminal == "fixed" and not self.qT:
            raise ValueError("a fixed terminal condition needs qT")
        return self


class CatalogEntry(BaseModel):
    name: str
    kind: ProblemKind
    description: str


class CatalogResponse(BaseModel):
    problems: List[CatalogEntry]
    total: int


class RunRequest(BaseModel):
    catalog: Optional[str] = None
    spec_text: Optional[str] = None
    dt: Optional[float] = Field(None, gt=0)
    t1: Optional[float] = Field(None, gt=0)
    steps: Optional[int] = Field(None, ge=0)

    @model_validator(mode="after")
    def check_source(self):
        if (self.catalog is None) == (self.spec_text is None):
            raise ValueError("give exactly one of catalog or spec_text")
        return self


class RunSummary(BaseModel):
    name: str
    kind: ProblemKind
    samples: int
    drifts: Dict[str, float] = {}

    def line(self) -> str:
        parts = " ".join(f"{key}={value:.3e}" for key, value in self.drifts.items())
        return f"{self.name or self.kind}: {self.samples} samples {parts}".rstrip()


class RunResponse(BaseModel):
    time_label: str
    labels: List[str]
    rows: List[List[Optional[float]]]  # None where a column is undefined (u at k = N, mu at k = 0)
    summary: RunSummary


class CheckRequest(BaseModel):
    only: Optional[str] = None


class InvariantResult(BaseModel):
    name: str
    description: str
    passed: bool
    value: Optional[float] = None
    tolerance: Optional[float] = None
    detail: str = ""
    seconds: float = 0.0


class CheckReport(BaseModel):
    results: List[InvariantResult]
    passed: int
    failed: int

    @property
    def ok(self) -> bool:
        return self.failed == 0
