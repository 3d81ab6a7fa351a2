"""Ingestion and serialization of Majorana-decomposed Hamiltonians.

The file format is versioned JSON:

    {
      "schema_version": 1,
      "n_modes": <fermionic mode count N>,
      "constant": <float>,
      "terms": [{"indices": [sorted 1-based, even-sized], "coeff": <float>}, ...],
      "reference_energy": <float, optional>,
      "metadata": {...}                      # optional, free-form
    }

Coefficients round-trip bit-exactly (json emits shortest-repr floats, which
parse back to the identical double).  NaN/inf are refused in both directions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import IO, Dict, Optional, Union

from .estimation import HamiltonianSpec
from .majorana import IndexSet, ModeCount, index_set

SCHEMA_VERSION = 1

VENDORED = ("h2_631g", "h2_sto3g", "h4_sto3g")


def load_vendored(name: str) -> "HamiltonianFile":
    """Load one of the molecule files shipped with the package."""
    if name not in VENDORED:
        raise ValueError(f"unknown vendored Hamiltonian {name!r}; available: {VENDORED}")
    text = resources.files("jointmeas").joinpath(f"data/{name}.json").read_text()
    return parse(text)


@dataclass(frozen=True)
class HamiltonianFile:
    """Parsed file: the spec plus the optional bookkeeping fields."""

    spec: HamiltonianSpec
    reference_energy: Optional[float] = None
    metadata: Optional[dict] = None

    @property
    def is_chemistry(self) -> bool:
        return self.spec.is_chemistry


def parse(source: Union[str, Path, IO[str]]) -> HamiltonianFile:
    """Parse and validate a Hamiltonian document from a path, file object, or JSON text."""
    if hasattr(source, "read"):
        doc = json.load(source)
    elif isinstance(source, str) and source.lstrip().startswith("{"):
        doc = json.loads(source)
    else:
        path = Path(source)
        if not path.exists():
            raise FileNotFoundError(f"no such Hamiltonian file: {source}")
        doc = json.loads(path.read_text())
    if not isinstance(doc, dict):
        raise ValueError("Hamiltonian document must be a JSON object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {doc.get('schema_version')!r}")
    n_modes = doc.get("n_modes")
    if not isinstance(n_modes, int) or n_modes < 1:
        raise ValueError(f"n_modes must be a positive integer, got {n_modes!r}")
    n = ModeCount(n_modes)
    constant = float(doc.get("constant", 0.0))
    terms: Dict[IndexSet, float] = {}
    for entry in doc.get("terms", []):
        indices = entry.get("indices")
        coeff = entry.get("coeff")
        if not isinstance(indices, list) or not isinstance(coeff, (int, float)):
            raise ValueError(f"malformed term entry {entry!r}")
        a = index_set(indices)
        if list(a) != indices:
            raise ValueError(f"term indices must be sorted ascending, got {indices}")
        if len(a) % 2:
            raise ValueError(f"odd-sized term {indices}")
        if a and a[-1] > n.n_majorana:
            raise ValueError(f"term index {a[-1]} out of range for 2N={n.n_majorana}")
        if a in terms:
            raise ValueError(f"duplicate term {indices}")
        if not math.isfinite(coeff):
            raise ValueError(f"non-finite coefficient for term {indices}")
        terms[a] = float(coeff)
    spec = HamiltonianSpec(n=n, terms=terms, constant=constant)
    ref = doc.get("reference_energy")
    if ref is not None:
        ref = float(ref)
        if not math.isfinite(ref):
            raise ValueError("non-finite reference_energy")
    return HamiltonianFile(spec=spec, reference_energy=ref, metadata=doc.get("metadata"))


def serialize(
    spec_or_file: Union[HamiltonianSpec, HamiltonianFile],
    reference_energy: Optional[float] = None,
    metadata: Optional[dict] = None,
) -> str:
    """Serialize to the versioned JSON document; parse(serialize(s)) == s exactly."""
    if isinstance(spec_or_file, HamiltonianFile):
        spec = spec_or_file.spec
        reference_energy = spec_or_file.reference_energy if reference_energy is None else reference_energy
        metadata = spec_or_file.metadata if metadata is None else metadata
    else:
        spec = spec_or_file
    doc = {
        "schema_version": SCHEMA_VERSION,
        "n_modes": spec.n.n_fermionic,
        "constant": spec.constant,
        "terms": [
            {"indices": list(a), "coeff": c}
            for a, c in sorted(spec.terms.items(), key=lambda kv: (len(kv[0]), kv[0]))
        ],
    }
    if reference_energy is not None:
        if not math.isfinite(reference_energy):
            raise ValueError("refusing to serialize non-finite reference_energy")
        doc["reference_energy"] = reference_energy
    if metadata is not None:
        doc["metadata"] = metadata
    return json.dumps(doc, indent=1, allow_nan=False)
