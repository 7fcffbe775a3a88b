"""Problem files and report serialization.

Problem files are JSON. Complex matrices are nested row-major lists of
``[re, im]`` pairs. Named sections: ``layouts``, ``states``, ``povms``,
``instruments``, ``ensembles`` and ``refinements``. States and refinements
refer to layouts and POVMs by name.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from measim.cq import Ensemble, Povm, QuantumInstrument, Refinement
from measim.errors import MeasimError, ParseError
from measim.qcore import SystemLayout, as_density

PROBLEM_VERSION = "measim-problem/1"
SECTIONS = ("layouts", "states", "povms", "instruments", "ensembles", "refinements")


def encode_matrix(a) -> list:
    arr = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in arr]


def decode_matrix(obj, path: str) -> np.ndarray:
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ParseError(path, "expected a non-empty list of rows")
    rows = []
    for i, row in enumerate(obj):
        vals = []
        for j, z in enumerate(row):
            if (
                not isinstance(z, list)
                or len(z) != 2
                or not all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in z)
            ):
                raise ParseError(f"{path}[{i}][{j}]", "expected an [re, im] pair of numbers")
            vals.append(complex(z[0], z[1]))
        rows.append(vals)
    if any(len(r) != len(rows[0]) for r in rows):
        raise ParseError(path, "rows have different lengths")
    return np.array(rows, dtype=complex)


@dataclass
class ProblemFile:
    """Raw named entries of a problem file plus validated views on demand."""

    layouts: dict = field(default_factory=dict)
    states: dict = field(default_factory=dict)
    povms: dict = field(default_factory=dict)
    instruments: dict = field(default_factory=dict)
    ensembles: dict = field(default_factory=dict)
    refinements: dict = field(default_factory=dict)
    version: str = PROBLEM_VERSION

    def layout(self, name: str) -> SystemLayout:
        e = self.layouts[name]
        return SystemLayout(tuple(e["dims"]), tuple(e["labels"]))

    def state(self, name: str) -> tuple[np.ndarray, SystemLayout]:
        e = self.states[name]
        rho = as_density(e["matrix"])
        lay = self.layout(e["layout"]) if e.get("layout") else SystemLayout((rho.shape[0],), ("A",))
        lay.check(rho)
        return rho, lay

    def povm(self, name: str) -> Povm:
        e = self.povms[name]
        return Povm(tuple(e["elements"]), tuple(e.get("labels") or ()))

    def instrument(self, name: str) -> QuantumInstrument:
        e = self.instruments[name]
        return QuantumInstrument(tuple(tuple(f) for f in e["kraus"]), tuple(e.get("labels") or ()))

    def ensemble(self, name: str) -> Ensemble:
        e = self.ensembles[name]
        return Ensemble(np.asarray(e["pmf"], dtype=float), tuple(e["states"]))

    def refinement(self, name: str) -> Refinement:
        e = self.refinements[name]
        src = e["internal"]
        internal = self.instrument(src) if src in self.instruments else self.povm(src)
        return Refinement(internal, np.asarray(e["post"], dtype=float), tuple(e.get("labels") or ()))

    def to_obj(self) -> dict:
        out: dict = {"version": self.version}
        if self.layouts:
            out["layouts"] = {k: {"dims": list(v["dims"]), "labels": list(v["labels"])} for k, v in self.layouts.items()}
        if self.states:
            out["states"] = {
                k: {"matrix": encode_matrix(v["matrix"]), **({"layout": v["layout"]} if v.get("layout") else {})}
                for k, v in self.states.items()
            }
        if self.povms:
            out["povms"] = {
                k: {"elements": [encode_matrix(e) for e in v["elements"]], **_labels(v)} for k, v in self.povms.items()
            }
        if self.instruments:
            out["instruments"] = {
                k: {"kraus": [[encode_matrix(m) for m in fam] for fam in v["kraus"]], **_labels(v)}
                for k, v in self.instruments.items()
            }
        if self.ensembles:
            out["ensembles"] = {
                k: {"pmf": [float(p) for p in v["pmf"]], "states": [encode_matrix(s) for s in v["states"]]}
                for k, v in self.ensembles.items()
            }
        if self.refinements:
            out["refinements"] = {
                k: {"internal": v["internal"], "post": [[float(t) for t in row] for row in v["post"]], **_labels(v)}
                for k, v in self.refinements.items()
            }
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_obj(), sort_keys=True, indent=2) + "\n"


def _labels(v: dict) -> dict:
    return {"labels": [str(s) for s in v["labels"]]} if v.get("labels") else {}


def _section(obj: dict, key: str) -> dict:
    sec = obj.get(key, {})
    if not isinstance(sec, dict):
        raise ParseError(key, "expected an object mapping names to entries")
    for name, entry in sec.items():
        if not isinstance(entry, dict):
            raise ParseError(f"{key}.{name}", "expected an object")
    return sec


def _require(entry: dict, key: str, path: str):
    if key not in entry:
        raise ParseError(path, f"missing field {key!r}")
    return entry[key]


def _pmf_list(v, path: str) -> list[float]:
    if not isinstance(v, list) or not all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in v):
        raise ParseError(path, "expected a list of numbers")
    return [float(t) for t in v]


def parse_problem(obj) -> ProblemFile:
    """Decode and validate every entry; failures name the offending field."""
    if not isinstance(obj, dict):
        raise ParseError("$", "top level must be an object")
    unknown = set(obj) - set(SECTIONS) - {"version"}
    if unknown:
        raise ParseError("$", f"unknown sections {sorted(unknown)}")
    version = obj.get("version", PROBLEM_VERSION)
    if version != PROBLEM_VERSION:
        raise ParseError("version", f"unsupported version {version!r}")
    pf = ProblemFile(version=version)

    for name, e in _section(obj, "layouts").items():
        p = f"layouts.{name}"
        dims = _require(e, "dims", p)
        labels = _require(e, "labels", p)
        if not isinstance(dims, list) or not all(isinstance(d, int) and not isinstance(d, bool) for d in dims):
            raise ParseError(f"{p}.dims", "expected a list of integers")
        if not isinstance(labels, list) or not all(isinstance(s, str) for s in labels):
            raise ParseError(f"{p}.labels", "expected a list of strings")
        pf.layouts[name] = {"dims": dims, "labels": labels}

    for name, e in _section(obj, "states").items():
        p = f"states.{name}"
        m = decode_matrix(_require(e, "matrix", p), f"{p}.matrix")
        lay = e.get("layout")
        if lay is not None and lay not in pf.layouts:
            raise ParseError(f"{p}.layout", f"unknown layout {lay!r}")
        pf.states[name] = {"matrix": m, "layout": lay}

    for name, e in _section(obj, "povms").items():
        p = f"povms.{name}"
        els = _require(e, "elements", p)
        if not isinstance(els, list):
            raise ParseError(f"{p}.elements", "expected a list of matrices")
        pf.povms[name] = {
            "elements": [decode_matrix(m, f"{p}.elements[{i}]") for i, m in enumerate(els)],
            "labels": list(e.get("labels") or []),
        }

    for name, e in _section(obj, "instruments").items():
        p = f"instruments.{name}"
        fams = _require(e, "kraus", p)
        if not isinstance(fams, list) or not all(isinstance(f, list) for f in fams):
            raise ParseError(f"{p}.kraus", "expected a list of Kraus families")
        pf.instruments[name] = {
            "kraus": [[decode_matrix(m, f"{p}.kraus[{x}][{y}]") for y, m in enumerate(f)] for x, f in enumerate(fams)],
            "labels": list(e.get("labels") or []),
        }

    for name, e in _section(obj, "ensembles").items():
        p = f"ensembles.{name}"
        sts = _require(e, "states", p)
        if not isinstance(sts, list):
            raise ParseError(f"{p}.states", "expected a list of matrices")
        pf.ensembles[name] = {
            "pmf": _pmf_list(_require(e, "pmf", p), f"{p}.pmf"),
            "states": [decode_matrix(m, f"{p}.states[{i}]") for i, m in enumerate(sts)],
        }

    for name, e in _section(obj, "refinements").items():
        p = f"refinements.{name}"
        src = _require(e, "internal", p)
        if src not in pf.povms and src not in pf.instruments:
            raise ParseError(f"{p}.internal", f"unknown POVM or instrument {src!r}")
        post = _require(e, "post", p)
        if not isinstance(post, list):
            raise ParseError(f"{p}.post", "expected a matrix of numbers")
        pf.refinements[name] = {
            "internal": src,
            "post": [_pmf_list(r, f"{p}.post[{i}]") for i, r in enumerate(post)],
            "labels": list(e.get("labels") or []),
        }

    for sec, getter in (
        ("layouts", pf.layout),
        ("states", pf.state),
        ("povms", pf.povm),
        ("instruments", pf.instrument),
        ("ensembles", pf.ensemble),
        ("refinements", pf.refinement),
    ):
        for name in getattr(pf, sec):
            try:
                getter(name)
            except MeasimError as exc:
                if isinstance(exc, ParseError):
                    raise
                raise ParseError(f"{sec}.{name}", f"{type(exc).__name__}: {exc}") from exc
    return pf


def loads_problem(text: str) -> ProblemFile:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno} column {exc.colno}", exc.msg) from exc
    return parse_problem(obj)


def load_problem(path) -> ProblemFile:
    """Read a problem file; ``bundled:<name>`` resolves to the packaged examples."""
    return loads_problem(read_text(path))


def read_text(path) -> str:
    s = str(path)
    if s.startswith("bundled:"):
        return bundled_text(s.split(":", 1)[1])
    return Path(s).read_text(encoding="utf-8")


def bundled_text(name: str) -> str:
    if not name.endswith(".json"):
        name += ".json"
    return resources.files("measim").joinpath("data", name).read_text(encoding="utf-8")


def bundled_names() -> list[str]:
    return sorted(p.name for p in resources.files("measim").joinpath("data").iterdir() if p.name.endswith(".json"))


def _plain(o):
    if isinstance(o, dict):
        return {str(k): _plain(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_plain(v) for v in o]
    if isinstance(o, np.ndarray):
        return _plain(o.tolist())
    if isinstance(o, np.generic):
        return _plain(o.item())
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, float) and not math.isfinite(o):
        return None if math.isnan(o) else ("inf" if o > 0 else "-inf")
    return o


def dumps_report(report: dict) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(_plain(report), sort_keys=True, indent=2, allow_nan=False) + "\n"
