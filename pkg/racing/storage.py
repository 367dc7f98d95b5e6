"""Reading and writing run artifacts: CSV tables, JSON documents, JSON lines and the manifest."""

import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from racing.errors import ArtifactError
from racing.models import (
    CenterlineMap,
    CurvatureModel,
    EstimateSnapshot,
    Measurement,
    PlanarPose,
    Polyline,
    RunMetrics,
    SamplingReport,
    ScenarioSet,
    TickRecord,
)


logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
POLYLINE_HEADER = ["x", "y"]
MAP_HEADER = ["lambda", "alpha", "x", "y"]
ESTIMATE_HEADER = ["lambda", "x", "y", "kappa"]
ACCEPTANCE_HEADER = ["attempt", "accepted", "distance", "constraints_ok"]
FLOAT_DIGITS = 12


def _normalize(value: Any) -> Any:
    """JSON-ready copy with floats rounded to a fixed number of significant digits."""
    if isinstance(value, BaseModel):
        return _normalize(value.model_dump(mode="json"))
    if isinstance(value, dict):
        return {str(k): _normalize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_normalize(v) for v in value]
    if isinstance(value, np.ndarray):
        return _normalize(value.tolist())
    if isinstance(value, (np.floating, float)):
        number = float(value)
        if not np.isfinite(number):
            return None
        return float(f"{number:.{FLOAT_DIGITS}g}")
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def dumps(document: Any) -> str:
    return json.dumps(_normalize(document), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def sha256_file(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _read_rows(path: PathLike, header: Sequence[str]) -> List[List[float]]:
    """Numeric rows of a CSV whose first line must contain `header`."""
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"{path}: file not found")
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            found = [name.strip() for name in next(reader)]
        except StopIteration:
            raise ArtifactError(f"{path}: empty file") from None
        missing = [name for name in header if name not in found]
        if missing:
            raise ArtifactError(f"{path}:1: missing column '{missing[0]}' (header {found})")
        columns = [found.index(name) for name in header]
        rows: List[List[float]] = []
        for line_number, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(row[i]) for i in columns])
            except (IndexError, ValueError) as e:
                raise ArtifactError(f"{path}:{line_number}: malformed row {row}: {e}") from e
    return rows


def read_polyline_csv(path: PathLike) -> Polyline:
    """Ordered points from an `x,y` CSV."""
    rows = _read_rows(path, POLYLINE_HEADER)
    if not rows:
        raise ArtifactError(f"{path}: no data rows")
    return Polyline.from_points(np.array(rows))


def read_measurement_csv(path: PathLike, time_index: int = 0) -> Measurement:
    return Measurement(points=read_polyline_csv(path), time_index=time_index)


def read_map_csv(path: PathLike, model: CurvatureModel, s_origin: float = 0.0) -> CenterlineMap:
    rows = _read_rows(path, MAP_HEADER)
    if not rows:
        raise ArtifactError(f"{path}: no data rows")
    array = np.array(rows)
    try:
        return CenterlineMap(mu=array[:, 1:], cum_arc=array[:, 0], model=model, s_origin=s_origin)
    except ValidationError as e:
        raise ArtifactError(f"{path}: invalid map: {e}") from e


def _load_json(path: PathLike) -> Any:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"{path}: file not found")
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ArtifactError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from e


def load_model(path: PathLike) -> CurvatureModel:
    try:
        return CurvatureModel.model_validate(_load_json(path))
    except ValidationError as e:
        raise ArtifactError(f"{path}: invalid curvature model: {e}") from e


def load_metrics(path: PathLike) -> RunMetrics:
    document = _load_json(path)
    if isinstance(document, dict) and "metrics" in document:
        document = document["metrics"]
    try:
        return RunMetrics.model_validate({k: v for k, v in document.items() if v is not None})
    except (ValidationError, AttributeError) as e:
        raise ArtifactError(f"{path}: invalid metrics document: {e}") from e


def load_scenarios(path: PathLike) -> ScenarioSet:
    document = _load_json(path)
    try:
        return ScenarioSet(
            models=[CurvatureModel.model_validate(m) for m in document["models"]],
            anchor=PlanarPose.model_validate(document["anchor"]),
            cum_arc=document["cum_arc"], s_max=document["s_max"],
            s_origin=document.get("s_origin", 0.0), shortfall=document.get("shortfall", False),
            distances=document.get("distances", []),
        )
    except (KeyError, TypeError, ValidationError) as e:
        raise ArtifactError(f"{path}: invalid scenario document: {e}") from e


class ArtifactStore:
    """Writes the artifacts of one command into a directory and keeps their checksums."""

    def __init__(self, directory: PathLike) -> None:
        self.directory = Path(directory)
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ArtifactError(f"{self.directory}: cannot create output directory: {e}") from e
        self.written: List[Path] = []

    def path(self, name: str) -> Path:
        return self.directory / name

    def record(self, path: Path) -> Path:
        if path not in self.written:
            self.written.append(path)
        logger.debug(f"Wrote {path}")
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self.path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(text)
        except OSError as e:
            raise ArtifactError(f"{path}: cannot write: {e}") from e
        return self.record(path)

    def write_json(self, name: str, document: Any) -> Path:
        return self.write_text(name, dumps(document))

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_format_cell(cell) for cell in row))
        return self.write_text(name, "\n".join(lines) + "\n")

    def append_jsonl(self, name: str, records: Iterable[Any]) -> Path:
        path = self.path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        # fresh file on the first write of this command
        with open(path, "a" if path in self.written else "w", encoding="utf-8") as f:
            for record in records:
                f.write(json.dumps(_normalize(record), sort_keys=True) + "\n")
        return self.record(path)

    # domain artifacts

    def write_polyline(self, name: str, line: Polyline) -> Path:
        return self.write_csv(name, POLYLINE_HEADER, line.points)

    def write_map(self, name: str, centerline: CenterlineMap) -> Path:
        rows = np.column_stack((centerline.cum_arc, centerline.mu))
        return self.write_csv(name, MAP_HEADER, rows)

    def write_model(self, name: str, model: CurvatureModel) -> Path:
        return self.write_json(name, model)

    def write_scenarios(self, name: str, scenarios: ScenarioSet) -> Path:
        return self.write_json(name, {
            "models": scenarios.models, "anchor": scenarios.anchor, "cum_arc": scenarios.cum_arc,
            "s_max": scenarios.s_max, "s_origin": scenarios.s_origin,
            "shortfall": scenarios.shortfall, "distances": scenarios.distances,
        })

    def write_acceptance(self, name: str, report: SamplingReport) -> Path:
        rows = [(r.attempt, int(r.accepted), r.distance, int(r.constraints_ok)) for r in report.records]
        return self.write_csv(name, ACCEPTANCE_HEADER, rows)

    def write_run_log(self, name: str, log: Sequence[TickRecord]) -> Path:
        header = list(TickRecord.model_fields)
        rows = [[getattr(record, field) for field in header] for record in log]
        return self.write_csv(name, header, rows)

    def write_estimates(self, directory: str, estimates: Sequence[EstimateSnapshot]) -> List[Path]:
        """One curve CSV per estimate, plus the model JSON when the estimate has one."""
        paths: List[Path] = []
        for estimate in estimates:
            stem = f"{directory}/tick_{estimate.tick:05d}"
            rows = np.column_stack((estimate.cum_arc, estimate.points, estimate.kappa))
            paths.append(self.write_csv(f"{stem}.csv", ESTIMATE_HEADER, rows))
            if estimate.model is not None:
                paths.append(self.write_json(f"{stem}.json", {"model": estimate.model,
                                                              "s_origin": estimate.s_origin}))
        return paths

    def write_manifest(self, inputs: Sequence[PathLike], config: Any, command: str,
                       version: str, seed: Optional[int] = None) -> Path:
        """Inputs, config hash and artifact checksums of this command."""
        config_text = dumps(config)
        manifest = {
            "command": command,
            "version": version,
            "seed": seed,
            "config_sha256": hashlib.sha256(config_text.encode("utf-8")).hexdigest(),
            "inputs": {str(p): sha256_file(p) for p in inputs if Path(p).exists()},
            "artifacts": {str(p.relative_to(self.directory)): sha256_file(p) for p in self.written},
        }
        path = self.write_text("manifest.json", dumps(manifest))
        logger.info(f"Manifest written to {path} ({len(manifest['artifacts'])} artifact(s))")
        return path


def _format_cell(cell: Any) -> str:
    if isinstance(cell, (bool, np.bool_)):
        return str(int(cell))
    if isinstance(cell, (float, np.floating)):
        return f"{float(cell):.{FLOAT_DIGITS}g}"
    return str(cell)
