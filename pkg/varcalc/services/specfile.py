"""
Declarative problem files: INI-style sections of `key = value` lines.

    [problem]    name, kind, description
    [structure]  kind, dim, factors, fields, metric, constants
    [functions]  lagrangian, hamiltonian, constraints, control, cost, control_dim
    [initial]    q0, y0, p0, mu0, q1, v0
    [horizon]    t0, t1, dt, h, steps, terminal, qT

Numbers in a list are separated by commas; expressions by semicolons. Frame fields are
vectors separated by semicolons with comma-separated components. Algebra constants are
`c,a,b:value` triples (1-based, only a < b needed); the lower indices are antisymmetrized.
"""
from pathlib import Path
from typing import Dict, List, Union
import configparser
import logging

import numpy as np
from pydantic import ValidationError

from varcalc.exceptions import SpecError
from varcalc.schemas.schemas import ProblemSpec, StructureSpec

logger = logging.getLogger(__name__)

SECTIONS = ("problem", "structure", "functions", "initial", "horizon")
FLOAT_LISTS = {"q0", "y0", "p0", "mu0", "q1", "v0", "qT", "factors"}
EXPR_LISTS = {"constraints", "control", "metric"}


def _floats(key: str, text: str) -> List[float]:
    try:
        return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise SpecError(f"{key}: expected comma-separated numbers, got {text!r}")


def _exprs(text: str) -> List[str]:
    return [x.strip() for x in text.split(";") if x.strip()]


def _constants(text: str, m: int) -> List[float]:
    C = np.zeros((m, m, m))
    for item in _exprs(text):
        try:
            indices, value = item.split(":")
            c, a, b = (int(i) - 1 for i in indices.split(","))
            C[c, a, b] = float(value)
            C[c, b, a] = -float(value)
        except (ValueError, IndexError):
            raise SpecError(f"constants: cannot read {item!r}; expected c,a,b:value with indices 1..{m}")
    return C.ravel().tolist()


def _structure(section: Dict[str, str]) -> StructureSpec:
    data: Dict[str, object] = {}
    for key, value in section.items():
        if key in ("kind",):
            data[key] = value.strip()
        elif key == "dim":
            data[key] = int(value)
        elif key == "factors":
            data[key] = _floats(key, value)
        elif key == "fields":
            data[key] = [[c.strip() for c in vec.split(",")] for vec in _exprs(value)]
        elif key == "metric":
            data[key] = [c.strip() for c in value.replace(";", ",").split(",") if c.strip()]
        elif key != "constants":
            raise SpecError(f"unknown key {key!r} in [structure]")
    if "constants" in section:
        if "dim" not in data:
            raise SpecError("[structure] constants need dim")
        data["constants"] = _constants(section["constants"], int(data["dim"]))
    return StructureSpec(**data)


def parse_spec(text: str, source: str = "<spec>") -> ProblemSpec:
    """
    Raises:
        SpecError: malformed file, unknown keys or invalid values
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise SpecError(f"{source}: {e}")
    unknown = [s for s in parser.sections() if s not in SECTIONS]
    if unknown:
        raise SpecError(f"{source}: unknown sections {unknown}")
    data: Dict[str, object] = {}
    try:
        for section in ("problem", "functions", "initial", "horizon"):
            if not parser.has_section(section):
                continue
            for key, value in parser.items(section):
                if key in FLOAT_LISTS:
                    data[key] = _floats(key, value)
                elif key in EXPR_LISTS:
                    data[key] = _exprs(value)
                elif key not in ProblemSpec.model_fields or key == "structure":
                    raise SpecError(f"{source}: unknown key {key!r} in [{section}]")
                else:
                    data[key] = value.strip()
        if parser.has_section("structure"):
            data["structure"] = _structure(dict(parser.items("structure")))
        spec = ProblemSpec(**data)
    except ValidationError as e:
        raise SpecError(f"{source}: {e.errors()[0]['loc']}: {e.errors()[0]['msg']}")
    except ValueError as e:
        raise SpecError(f"{source}: {e}")
    logger.debug(f"loaded {spec.kind} problem {spec.name or source}")
    return spec


def load_spec(path: Union[str, Path]) -> ProblemSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise SpecError(f"cannot read spec file {path}: {e}")
    return parse_spec(text, source=str(path))
