"""File formats: typed CSV datasets, JSON parameter files, network exports.

Dataset CSV headers tag every column as ``name:family``.  Values are written
with shortest-exact float formatting (integers without a trailing ``.0``),
so write -> read round-trips are bitwise identities.

Parameter JSON stores p, the family tags, optional column names, and the
unique free entries keyed by ``"j,k"`` index pairs; the loader rejects
asymmetric duplicates and structural-zero violations.
"""

from __future__ import annotations

import csv
import json
import xml.etree.ElementTree as ET
from typing import Optional, Sequence

import numpy as np

from .errors import DataFormatError, ParameterError
from .experiments import top_k_edges
from .families import VariateFamily
from .model import MixedDataset, ParamMatrix, structural_zero_mask

_EXPORT_FORMATS = ("dot", "graphml", "json")


def _format_value(x: float) -> str:
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(float(x))


def save_dataset(data: MixedDataset, path) -> None:
    names = data.column_names()
    header = ",".join(f"{name}:{fam.value}" for name, fam in zip(names, data.families))
    lines = [header]
    for row in data.values:
        lines.append(",".join(_format_value(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_dataset(path) -> MixedDataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        names, families = [], []
        for idx, cell in enumerate(header):
            name, sep, tag = cell.strip().partition(":")
            if not sep or not name:
                raise DataFormatError(
                    f"{path}: header cell {idx} must look like 'name:family', got {cell!r}"
                )
            try:
                families.append(VariateFamily.from_tag(tag))
            except Exception:
                raise DataFormatError(
                    f"{path}: unknown family tag {tag!r} in header cell {idx}"
                ) from None
            names.append(name)
        p = len(names)
        rows = []
        for i, row in enumerate(reader):
            if not row:
                continue
            if len(row) != p:
                raise DataFormatError(
                    f"{path}: row {i} has {len(row)} fields, expected {p}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DataFormatError(f"{path}: row {i}: {exc}") from None
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    try:
        return MixedDataset(np.asarray(rows), tuple(families), tuple(names))
    except Exception as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def save_theta(theta: ParamMatrix, path, names: Optional[Sequence[str]] = None) -> None:
    doc = {
        "p": theta.p,
        "families": [f.value for f in theta.families],
        "entries": {},
    }
    if names is not None:
        if len(names) != theta.p:
            raise ParameterError(f"{len(names)} names for p = {theta.p}")
        doc["names"] = list(names)
    struct = theta.structural_zeros
    for j in range(theta.p):
        for k in range(j, theta.p):
            if not struct[j, k]:
                doc["entries"][f"{j},{k}"] = float(theta.entries[j, k])
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_theta_document(doc, path) -> tuple[ParamMatrix, Optional[tuple[str, ...]]]:
    try:
        p = int(doc["p"])
        families = tuple(VariateFamily.from_tag(t) for t in doc["families"])
        raw = doc["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}: malformed parameter document: {exc}") from None
    if len(families) != p:
        raise DataFormatError(f"{path}: {len(families)} families for p = {p}")
    entries = np.zeros((p, p))
    seen: dict[tuple[int, int], float] = {}
    for key, value in raw.items():
        try:
            j, k = (int(v) for v in key.split(","))
            value = float(value)
        except ValueError:
            raise DataFormatError(f"{path}: bad entry key/value {key!r}") from None
        if not (0 <= j < p and 0 <= k < p):
            raise DataFormatError(f"{path}: entry index ({j}, {k}) out of range")
        a, b = min(j, k), max(j, k)
        if (a, b) in seen and seen[(a, b)] != value:
            raise DataFormatError(
                f"{path}: asymmetric duplicate for coordinate ({a}, {b}): "
                f"{seen[(a, b)]!r} vs {value!r}"
            )
        seen[(a, b)] = value
        entries[a, b] = entries[b, a] = value
    struct = structural_zero_mask(families)
    bad = np.argwhere(struct & (entries != 0.0))
    if bad.size:
        j, k = bad[0]
        raise DataFormatError(
            f"{path}: nonzero entry at structural zero ({j}, {k}): "
            f"{families[j].value}-{families[k].value} must be 0"
        )
    names = None
    if "names" in doc:
        names = tuple(str(v) for v in doc["names"])
        if len(names) != p:
            raise DataFormatError(f"{path}: {len(names)} names for p = {p}")
    try:
        return ParamMatrix(entries, families), names
    except Exception as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def load_theta(path) -> ParamMatrix:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: invalid JSON: {exc}") from None
    theta, _ = _parse_theta_document(doc, path)
    return theta


def load_theta_with_names(path) -> tuple[ParamMatrix, Optional[tuple[str, ...]]]:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: invalid JSON: {exc}") from None
    return _parse_theta_document(doc, path)


def save_theta_matrix_csv(theta: ParamMatrix, path) -> None:
    """Plain numeric p x p matrix, one row per line (heatmap-ready)."""
    with open(path, "w") as fh:
        for row in theta.entries:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _node_labels(theta: ParamMatrix, names: Optional[Sequence[str]]) -> list[str]:
    if names is None:
        return [f"x{j + 1}" for j in range(theta.p)]
    if len(names) != theta.p:
        raise ParameterError(f"{len(names)} names for p = {theta.p}")
    return list(names)


def export_network(
    theta: ParamMatrix,
    k: int,
    format: str,
    path,
    names: Optional[Sequence[str]] = None,
) -> None:
    """Write the top-k-edge network with family-labelled nodes.

    DOT output renders negative-weight edges dashed and positive ones solid.
    """
    if format not in _EXPORT_FORMATS:
        raise ParameterError(
            f"format must be one of {_EXPORT_FORMATS}, got {format!r}"
        )
    labels = _node_labels(theta, names)
    edges = top_k_edges(theta, k)
    if format == "dot":
        _write_dot(theta, labels, edges, path)
    elif format == "graphml":
        _write_graphml(theta, labels, edges, path)
    else:
        _write_json_network(theta, labels, edges, path)


def _write_dot(theta, labels, edges, path) -> None:
    lines = ["graph mrf {"]
    for j in range(theta.p):
        fam = theta.families[j].value
        lines.append(f'  n{j} [label="{labels[j]}\\n({fam})", family="{fam}"];')
    for j, k, w in edges.edges:
        style = "dashed" if w < 0 else "solid"
        lines.append(f'  n{j} -- n{k} [weight={repr(float(w))}, style={style}];')
    lines.append("}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_graphml(theta, labels, edges, path) -> None:
    root = ET.Element("graphml", xmlns="http://graphml.graphdrawing.org/xmlns")
    for key_id, target, name, kind in (
        ("d0", "node", "name", "string"),
        ("d1", "node", "family", "string"),
        ("d2", "edge", "weight", "double"),
    ):
        ET.SubElement(
            root,
            "key",
            id=key_id,
            attrib={"for": target, "attr.name": name, "attr.type": kind},
        )
    graph = ET.SubElement(root, "graph", id="mrf", edgedefault="undirected")
    for j in range(theta.p):
        node = ET.SubElement(graph, "node", id=f"n{j}")
        ET.SubElement(node, "data", key="d0").text = labels[j]
        ET.SubElement(node, "data", key="d1").text = theta.families[j].value
    for idx, (j, k, w) in enumerate(edges.edges):
        edge = ET.SubElement(
            graph, "edge", id=f"e{idx}", source=f"n{j}", target=f"n{k}"
        )
        ET.SubElement(edge, "data", key="d2").text = repr(float(w))
    tree = ET.ElementTree(root)
    ET.indent(tree)
    tree.write(path, encoding="unicode", xml_declaration=True)
    with open(path, "a") as fh:
        fh.write("\n")


def _write_json_network(theta, labels, edges, path) -> None:
    doc = {
        "nodes": [
            {"id": j, "name": labels[j], "family": theta.families[j].value}
            for j in range(theta.p)
        ],
        "edges": [
            {"source": j, "target": k, "weight": w} for j, k, w in edges.edges
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
