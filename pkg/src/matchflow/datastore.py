"""File formats and persistence.

Schemata are JSON trees, histories are JSON Lines (one decision per line),
references are JSON pair lists, matrices are CSV with a dimension header, and
calibrator parameters live in a versioned JSON artifact.  Serialization is
canonical (sorted keys, shortest round-trip floats) so files diff cleanly.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .calibrator.network import PARAM_FIELDS, CalibratorParams
from .core import (
    Attribute,
    DecisionHistory,
    DecisionRecord,
    ReferenceMatch,
    Schema,
)
from .matchers import Lexicon, SimilarityMatrix

PARAMS_FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# schemata


def _tree_to_attributes(node: dict, path: tuple[str, ...], out: list[Attribute]) -> None:
    name = node.get("name")
    if not isinstance(name, str) or not name:
        raise ValueError(f"schema node at path {path!r}: missing or empty 'name'")
    children = node.get("children")
    if children:
        for child in children:
            _tree_to_attributes(child, path + (name,), out)
    else:
        out.append(
            Attribute(
                id=len(out),
                name=name,
                path=path + (name,),
                datatype=node.get("datatype"),
                instances=tuple(node.get("instances", ())),
            )
        )


def load_schema(path: str | Path) -> Schema:
    path = Path(path)
    tree = json.loads(path.read_text(encoding="utf-8"))
    attrs: list[Attribute] = []
    root_name = tree.get("name")
    if not isinstance(root_name, str) or not root_name:
        raise ValueError(f"{path}: schema root must carry a non-empty 'name'")
    for child in tree.get("children", []):
        _tree_to_attributes(child, (root_name,), attrs)
    if not attrs:
        raise ValueError(f"{path}: schema has no leaf attributes")
    return Schema(name=root_name, attributes=tuple(attrs))


def _attributes_to_tree(schema: Schema) -> dict:
    """Rebuild the nested tree from attribute paths."""
    root: dict = {"name": schema.name, "children": []}
    index: dict[tuple[str, ...], dict] = {(schema.name,): root}
    for attr in schema.attributes:
        if attr.path[0] != schema.name:
            raise ValueError(
                f"attribute {attr.name!r}: path must start at schema root {schema.name!r}"
            )
        for depth in range(2, len(attr.path)):
            prefix = attr.path[:depth]
            if prefix not in index:
                node = {"name": prefix[-1], "children": []}
                index[prefix[:-1]]["children"].append(node)
                index[prefix] = node
        leaf: dict = {"name": attr.name}
        if attr.datatype is not None:
            leaf["datatype"] = attr.datatype
        if attr.instances:
            leaf["instances"] = list(attr.instances)
        index[attr.path[:-1]]["children"].append(leaf)
    return root


def save_schema(schema: Schema, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(_attributes_to_tree(schema), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


# ---------------------------------------------------------------------------
# histories


def load_history(path: str | Path) -> DecisionHistory:
    path = Path(path)
    records = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            records.append(
                DecisionRecord(
                    pair=(int(obj["row"]), int(obj["col"])),
                    confidence=float(obj["confidence"]),
                    timestamp=float(obj["t"]),
                )
            )
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}:{lineno}: malformed history record: {exc}") from exc
    return DecisionHistory.of(records)


def save_history(history: DecisionHistory, path: str | Path) -> None:
    lines = [
        json.dumps(
            {"col": rec.pair[1], "confidence": rec.confidence, "row": rec.pair[0], "t": rec.timestamp},
            sort_keys=True,
        )
        for rec in history.records
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


# ---------------------------------------------------------------------------
# reference matches


def load_reference(path: str | Path) -> ReferenceMatch:
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise ValueError(f"{path}: reference must be a JSON list of [row, col] pairs")
    pairs = []
    for k, item in enumerate(data):
        if not isinstance(item, list) or len(item) != 2:
            raise ValueError(f"{path}: entry {k} is not a [row, col] pair: {item!r}")
        pairs.append((int(item[0]), int(item[1])))
    return ReferenceMatch.of(pairs)


def save_reference(ref: ReferenceMatch, path: str | Path) -> None:
    data = [[r, c] for r, c in sorted(ref.pairs)]
    Path(path).write_text(json.dumps(data) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# matrices


def load_matrix(path: str | Path) -> SimilarityMatrix:
    path = Path(path)
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    try:
        n, m = (int(x) for x in lines[0].split(","))
    except ValueError as exc:
        raise ValueError(f"{path}:1: header must be 'rows,cols': {exc}") from exc
    if len(lines) - 1 != n:
        raise ValueError(f"{path}: header says {n} rows but file has {len(lines) - 1}")
    values = np.empty((n, m))
    for i, line in enumerate(lines[1:]):
        cells = line.split(",")
        if len(cells) != m:
            raise ValueError(f"{path}:{i + 2}: expected {m} cells, got {len(cells)}")
        for j, cell in enumerate(cells):
            try:
                v = float(cell)
            except ValueError as exc:
                raise ValueError(f"{path}:{i + 2}: cell ({i}, {j}) is not a number") from exc
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{path}:{i + 2}: cell ({i}, {j}) value {v} outside [0, 1]")
            values[i, j] = v
    return SimilarityMatrix(values)


def save_matrix(mat: SimilarityMatrix, path: str | Path) -> None:
    lines = [f"{mat.n},{mat.m}"]
    for i in range(mat.n):
        lines.append(",".join(repr(float(v)) for v in mat.values[i]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# lexicon


def load_lexicon(path: str | Path) -> Lexicon:
    relations: dict[str, set[str]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        if "\t" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'token<TAB>related,...'")
        token, rest = line.split("\t", 1)
        relations.setdefault(token.strip().lower(), set()).update(
            t.strip().lower() for t in rest.split(",") if t.strip()
        )
    return Lexicon(relations)


def save_lexicon(lex_relations: dict[str, set[str]], path: str | Path) -> None:
    lines = [f"{token}\t{','.join(sorted(related))}" for token, related in sorted(lex_relations.items())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# calibrator artifact


def save_params(params: CalibratorParams, path: str | Path) -> None:
    params.validate()
    blob = {
        "format_version": PARAMS_FORMAT_VERSION,
        "hidden_size": params.hidden_size,
        "fc_size": params.fc_size,
        "scaling": {"delta_clip": params.delta_clip},
        "weights": {
            name: {
                "shape": list(getattr(params, name).shape),
                "data": base64.b64encode(
                    np.ascontiguousarray(getattr(params, name), dtype="<f8").tobytes()
                ).decode("ascii"),
            }
            for name in PARAM_FIELDS
        },
    }
    Path(path).write_text(json.dumps(blob, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_params(path: str | Path) -> CalibratorParams:
    path = Path(path)
    blob = json.loads(path.read_text(encoding="utf-8"))
    version = blob.get("format_version")
    if version != PARAMS_FORMAT_VERSION:
        raise ValueError(
            f"{path}: artifact format version {version} unsupported (need {PARAMS_FORMAT_VERSION})"
        )
    arrays = {}
    for name in PARAM_FIELDS:
        entry = blob["weights"][name]
        arr = np.frombuffer(base64.b64decode(entry["data"]), dtype="<f8").astype(np.float64)
        arrays[name] = arr.reshape(entry["shape"])
    params = CalibratorParams(delta_clip=float(blob["scaling"]["delta_clip"]), **arrays)
    params.validate()
    return params


# ---------------------------------------------------------------------------
# task bundles


@dataclass(frozen=True)
class TaskBundle:
    """One matching task on disk: schema pair, optional reference and
    algorithmic matrix, zero or more histories, and metadata."""

    name: str
    version: int
    schema_a: Schema
    schema_b: Schema
    reference: Optional[ReferenceMatch] = None
    algorithmic: Optional[SimilarityMatrix] = None
    histories: dict[str, DecisionHistory] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.schema_a)

    @property
    def m(self) -> int:
        return len(self.schema_b)

    def ref_size(self) -> int:
        """Known reference size, or the 1:1 estimate min(n, m)."""
        if self.reference is not None and len(self.reference) > 0:
            return len(self.reference)
        return min(self.n, self.m)


def load_task_bundle(directory: str | Path) -> TaskBundle:
    directory = Path(directory)
    missing = [
        name
        for name in ("schema_a.json", "schema_b.json", "meta.json")
        if not (directory / name).exists()
    ]
    if missing:
        raise ValueError(f"{directory}: missing mandatory bundle members: {', '.join(missing)}")
    meta = json.loads((directory / "meta.json").read_text(encoding="utf-8"))
    schema_a = load_schema(directory / "schema_a.json")
    schema_b = load_schema(directory / "schema_b.json")
    n, m = len(schema_a), len(schema_b)

    reference = None
    if (directory / "reference.json").exists():
        reference = load_reference(directory / "reference.json")
        bad = [p for p in reference.pairs if not (0 <= p[0] < n and 0 <= p[1] < m)]
        if bad:
            raise ValueError(f"{directory}: reference pairs out of bounds for {n}x{m}: {sorted(bad)[:3]}")

    algorithmic = None
    if (directory / "algorithmic.csv").exists():
        algorithmic = load_matrix(directory / "algorithmic.csv")
        if (algorithmic.n, algorithmic.m) != (n, m):
            raise ValueError(
                f"{directory}: algorithmic matrix is {algorithmic.n}x{algorithmic.m} "
                f"but schemata give {n}x{m}"
            )

    histories: dict[str, DecisionHistory] = {}
    hist_dir = directory / "histories"
    if hist_dir.is_dir():
        for path in sorted(hist_dir.glob("*.jsonl")):
            histories[path.stem] = load_history(path)

    return TaskBundle(
        name=str(meta.get("name", directory.name)),
        version=int(meta.get("version", 1)),
        schema_a=schema_a,
        schema_b=schema_b,
        reference=reference,
        algorithmic=algorithmic,
        histories=histories,
    )


def save_task_bundle(bundle: TaskBundle, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "meta.json").write_text(
        json.dumps({"name": bundle.name, "version": bundle.version}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    save_schema(bundle.schema_a, directory / "schema_a.json")
    save_schema(bundle.schema_b, directory / "schema_b.json")
    if bundle.reference is not None:
        save_reference(bundle.reference, directory / "reference.json")
    if bundle.algorithmic is not None:
        save_matrix(bundle.algorithmic, directory / "algorithmic.csv")
    if bundle.histories:
        hist_dir = directory / "histories"
        hist_dir.mkdir(exist_ok=True)
        for name, history in bundle.histories.items():
            save_history(history, hist_dir / f"{name}.jsonl")


def fixture_path(name: str) -> Path:
    """Path to a bundled fixture directory or file."""
    return Path(__file__).parent / "fixtures" / name
