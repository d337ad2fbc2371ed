"""Reading and writing problems, Ising models and the bundled reference problems."""

from __future__ import annotations

import json
import os
from functools import lru_cache
from pathlib import Path
from typing import Any, Union

import jsonschema

from annealing.exceptions import InvalidInputError
from annealing.services.bitstrings import BasisState
from annealing.services.ising import IsingModel
from annealing.services.sat2 import TwoSatProblem, read_dimacs, write_dimacs

ASSET_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "assets")
SCHEMA_DIR = os.path.join(ASSET_DIR, "schemas")
FIXTURE_PATH = os.path.join(ASSET_DIR, "problems", "appendix_problems.json")

PathLike = Union[str, Path]


# -----------------------------------------------------------------------------
# SCHEMAS
# -----------------------------------------------------------------------------

@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    path = os.path.join(SCHEMA_DIR, f"{name}.schema.json")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def validate_document(data: Any, schema_name: str) -> None:
    try:
        jsonschema.validate(instance=data, schema=load_schema(schema_name),
                            cls=jsonschema.Draft202012Validator)
    except jsonschema.ValidationError as e:
        raise InvalidInputError(f"Invalid {schema_name.replace('_', ' ')} document: {e.message}") from e


def _read_json(path: PathLike) -> Any:
    path = Path(path)
    if not path.is_file():
        raise InvalidInputError(f"File {path} does not exist.")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"{path} is not valid JSON: {e}") from e


# -----------------------------------------------------------------------------
# PROBLEMS
# -----------------------------------------------------------------------------

def problem_to_json(problem: TwoSatProblem) -> dict:
    return problem.to_json_dict()


def problem_from_json(data: dict, label: str | None = None) -> TwoSatProblem:
    validate_document(data, "problem")
    return TwoSatProblem.from_signed(data["n_vars"], data["clauses"], label=data.get("label") or label)


def load_problem(path: PathLike) -> TwoSatProblem:
    """Load a problem from ``.json`` or DIMACS ``.cnf``."""
    path = Path(path)
    if path.suffix.lower() in (".cnf", ".dimacs"):
        if not path.is_file():
            raise InvalidInputError(f"File {path} does not exist.")
        return read_dimacs(path.read_text(encoding="utf-8"), label=path.stem)
    return problem_from_json(_read_json(path), label=path.stem)


def write_problem(problem: TwoSatProblem, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() in (".cnf", ".dimacs"):
        path.write_text(write_dimacs(problem), encoding="utf-8")
    else:
        path.write_text(json.dumps(problem_to_json(problem), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# -----------------------------------------------------------------------------
# ISING MODELS
# -----------------------------------------------------------------------------

def ising_to_json(model: IsingModel) -> dict:
    return model.to_json_dict()


def ising_from_json(data: dict) -> IsingModel:
    validate_document(data, "ising")
    return IsingModel.from_json_dict(data)


def load_ising(path: PathLike) -> IsingModel:
    return ising_from_json(_read_json(path))


# -----------------------------------------------------------------------------
# BUNDLED REFERENCE PROBLEMS
# -----------------------------------------------------------------------------

@lru_cache(maxsize=1)
def _fixture_bundle() -> dict:
    bundle = _read_json(FIXTURE_PATH)
    validate_document(bundle, "fixture_bundle")
    return {entry["label"]: entry for entry in bundle["problems"]}


def fixture_labels() -> list[str]:
    return list(_fixture_bundle())


def _fixture_entry(label: str) -> dict:
    try:
        return _fixture_bundle()[str(label)]
    except KeyError:
        raise InvalidInputError(f"Unknown fixture {label!r}; available: {', '.join(fixture_labels())}.") from None


def fixture_problem(label: str) -> TwoSatProblem:
    entry = _fixture_entry(label)
    return TwoSatProblem.from_signed(entry["n_vars"], entry["clauses"], label=entry["label"])


def fixture_ground_states(label: str) -> list[BasisState]:
    """Ground states in the order the reference tables list them."""
    return [BasisState.from_string(s) for s in _fixture_entry(label)["ground_states"]]


def resolve_problem(reference: str) -> TwoSatProblem:
    """A file path, or the label of a bundled problem."""
    if os.path.exists(reference):
        return load_problem(reference)
    if str(reference) in _fixture_bundle():
        return fixture_problem(reference)
    raise InvalidInputError(f"Problem {reference!r} is neither a file nor a bundled problem.")
