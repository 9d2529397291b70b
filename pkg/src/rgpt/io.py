"""Readers for the on-disk input formats (manifest, risk CSVs, priors CSV)."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadConfig, DataError
from .ranking import PriorSpec
from .risk import RiskTable


@dataclass(frozen=True)
class RiskEntry:
    name: str
    file: Path
    constrained: bool
    alpha: float | None = None


@dataclass(frozen=True)
class Manifest:
    risks: tuple[RiskEntry, ...]
    labels: tuple[str, ...] | None = None
    priors: Path | None = None
    pseudocount: float | None = None
    path: Path | None = None

    @property
    def alphas(self) -> tuple[float, ...]:
        return tuple(r.alpha for r in self.risks if r.constrained)

    def ordered_risks(self) -> list[RiskEntry]:
        """Constrained risks first, each group in manifest order."""
        return ([r for r in self.risks if r.constrained]
                + [r for r in self.risks if not r.constrained])

    def input_files(self) -> list[Path]:
        files = [r.file for r in self.risks]
        if self.priors is not None:
            files.append(self.priors)
        return files


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise DataError(f"manifest {path} not found") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from None
    if not isinstance(data, dict):
        raise BadConfig(f"{path}: manifest must be a JSON object")
    base = path.parent
    entries = []
    raw = data.get("risks")
    if not isinstance(raw, list) or not raw:
        raise BadConfig(f"{path}: field 'risks' must be a non-empty list")
    for i, r in enumerate(raw):
        where = f"{path}: risks[{i}]"
        if not isinstance(r, dict) or "name" not in r or "file" not in r:
            raise BadConfig(f"{where} needs 'name' and 'file'")
        constrained = bool(r.get("constrained", False))
        alpha = r.get("alpha")
        if constrained:
            if alpha is None:
                raise BadConfig(f"{where} ({r['name']!r}) is constrained but has no 'alpha'")
            try:
                alpha = float(alpha)
            except (TypeError, ValueError):
                raise BadConfig(f"{where}.alpha is not a number: {alpha!r}") from None
            if not 0 < alpha < 1:
                raise BadConfig(f"{where}.alpha must lie in (0, 1), got {alpha}")
        entries.append(RiskEntry(str(r["name"]), base / r["file"], constrained, alpha))
    if not any(e.constrained for e in entries):
        raise BadConfig(f"{path}: at least one risk must be constrained")
    names = [e.name for e in entries]
    if len(set(names)) != len(names):
        raise BadConfig(f"{path}: risk names must be unique")
    labels = data.get("hyperparameters")
    priors = data.get("priors")
    pseudocount = data.get("pseudocount")
    if pseudocount is not None:
        try:
            pseudocount = float(pseudocount)
        except (TypeError, ValueError):
            raise BadConfig(f"{path}: pseudocount is not a number: {pseudocount!r}") from None
        if pseudocount < 0:
            raise BadConfig(f"{path}: pseudocount must be non-negative")
    return Manifest(
        risks=tuple(entries),
        labels=tuple(str(x) for x in labels) if labels is not None else None,
        priors=base / priors if priors else None,
        pseudocount=pseudocount,
        path=path,
    )


def _read_rows(path: Path) -> list[list[str]]:
    try:
        with open(path, newline="") as fh:
            return [row for row in csv.reader(fh)]
    except FileNotFoundError:
        raise DataError(f"file {path} not found") from None


def _parse_float(text: str, path: Path, line: int, col: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(f"{path}: line {line}, column {col}: cannot parse {text!r} as a number") from None


def read_risk_csv(path: str | Path, labels: tuple[str, ...] | None = None):
    """Read one risk's losses: header of hyperparameter labels, one row per sample.

    Returns ``(labels, values)`` with ``values`` of shape ``(n_samples, n_labels)``,
    columns reordered to ``labels`` when given.
    """
    path = Path(path)
    rows = _read_rows(path)
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate hyperparameter labels in header")
    body = [r for r in rows[1:] if r]
    values = np.empty((len(body), len(header)))
    for li, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: line {li} has {len(row)} fields, expected {len(header)}")
        for ci, cell in enumerate(row, start=1):
            values[li - 2, ci - 1] = _parse_float(cell.strip(), path, li, ci)
    if labels is None:
        return tuple(header), values
    if set(labels) != set(header):
        missing = sorted(set(labels) - set(header))
        extra = sorted(set(header) - set(labels))
        raise DataError(f"{path}: hyperparameter labels differ from the manifest "
                        f"(missing {missing[:5]}, unexpected {extra[:5]})")
    pos = {h: i for i, h in enumerate(header)}
    return tuple(labels), values[:, [pos[lab] for lab in labels]]


def load_table(manifest: Manifest) -> RiskTable:
    """Stack the manifest's risk CSVs into one table (constrained risks first)."""
    labels = manifest.labels
    columns = []
    n = None
    ordered = manifest.ordered_risks()
    for entry in ordered:
        labels, values = read_risk_csv(entry.file, labels)
        if n is not None and values.shape[0] != n:
            raise DataError(f"{entry.file}: {values.shape[0]} samples, expected {n}")
        n = values.shape[0]
        columns.append(values)
    return RiskTable(np.stack(columns, axis=2), labels, tuple(e.name for e in ordered))


def read_priors(path: str | Path, labels: tuple[str, ...], pseudocount: float) -> PriorSpec:
    """Read a prior matrix in square or ``i,j,eta`` triplet form.

    Square form: a header row of labels, then one row per label (optionally
    led by the row's label).  Triplet form: header ``i,j,eta`` with labels
    (or 0-based indices) in the first two columns; the mirrored entry is
    filled as ``1 - eta`` unless given, and unlisted pairs default to 0.5.
    """
    path = Path(path)
    rows = [r for r in _read_rows(path) if r]
    if not rows:
        raise DataError(f"{path}: empty priors file")
    header = [h.strip() for h in rows[0]]
    n = len(labels)
    pos = {lab: i for i, lab in enumerate(labels)}
    eta = np.full((n, n), 0.5)

    if [h.lower() for h in header] == ["i", "j", "eta"]:
        given = set()

        def resolve(tok: str, li: int, ci: int) -> int:
            tok = tok.strip()
            if tok in pos:
                return pos[tok]
            if tok.isdigit() and int(tok) < n:
                return int(tok)
            raise DataError(f"{path}: line {li}, column {ci}: unknown hyperparameter {tok!r}")

        for li, row in enumerate(rows[1:], start=2):
            if len(row) != 3:
                raise DataError(f"{path}: line {li} has {len(row)} fields, expected 3")
            i, j = resolve(row[0], li, 1), resolve(row[1], li, 2)
            val = _parse_float(row[2].strip(), path, li, 3)
            eta[i, j] = val
            given.add((i, j))
            if (j, i) not in given:
                eta[j, i] = 1.0 - val
        return PriorSpec(eta, pseudocount, tuple(labels))

    cols = header[1:] if header and header[0] == "" else header
    if set(cols) != set(labels) or len(cols) != n:
        raise DataError(f"{path}: prior header does not list exactly the manifest's hyperparameters")
    body = rows[1:]
    if len(body) != n:
        raise DataError(f"{path}: expected {n} prior rows, found {len(body)}")
    raw = np.empty((n, n))
    row_labels = []
    for li, row in enumerate(body, start=2):
        cells = row
        if len(row) == n + 1:
            row_labels.append(row[0].strip())
            cells = row[1:]
        elif len(row) != n:
            raise DataError(f"{path}: line {li} has {len(row)} fields, expected {n}")
        for ci, cell in enumerate(cells, start=1):
            raw[li - 2, ci - 1] = _parse_float(cell.strip(), path, li, ci + (len(row) - n))
    rorder = [pos[c] for c in cols]
    if row_labels:
        if sorted(row_labels) != sorted(labels):
            raise DataError(f"{path}: row labels do not match the header")
        rpos = [pos[r] for r in row_labels]
    else:
        rpos = rorder
    eta[np.ix_(rpos, rorder)] = raw
    return PriorSpec(eta, pseudocount, tuple(labels))


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_risk_csv(path: str | Path, labels, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(labels)
        for row in np.asarray(values):
            w.writerow([repr(float(x)) if x % 1 else str(int(x)) for x in row])


def write_priors_csv(path: str | Path, prior: PriorSpec, labels: tuple[str, ...]) -> None:
    """Write a prior in square form with a leading row-label column."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + list(labels))
        for lab, row in zip(labels, prior.eta):
            w.writerow([lab] + [repr(float(x)) for x in row])


def write_demo_inputs(directory: str | Path, table: RiskTable, alphas, prior: PriorSpec | None = None,
                      risk_names: tuple[str, ...] | None = None) -> Path:
    """Write a manifest plus one CSV per risk (and a priors CSV) for ``table``.

    The first ``len(alphas)`` risks are marked constrained.  Returns the
    manifest path.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = risk_names or table.risk_names
    entries = []
    for l, name in enumerate(names):
        fname = f"{name}.csv"
        write_risk_csv(directory / fname, table.labels, table.values[:, :, l])
        entry = {"name": name, "file": fname, "constrained": l < len(alphas)}
        if l < len(alphas):
            entry["alpha"] = float(alphas[l])
        entries.append(entry)
    manifest = {"hyperparameters": list(table.labels), "risks": entries}
    if prior is not None:
        write_priors_csv(directory / "priors.csv", prior, table.labels)
        manifest["priors"] = "priors.csv"
        manifest["pseudocount"] = prior.pseudocount
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path
