"""JSON and CSV input/output.

An Element travels as {"blocks": [B_1, ..., B_k]} with each B_i an
n_i x n_i row-major array of [re, im] pairs; the descriptor is implied
by the block shapes.  Floats are emitted through Python's shortest
round-trip repr, which preserves all 17 significant digits needed to
reconstruct the exact double.
"""

from __future__ import annotations

import json
from fractions import Fraction

import numpy as np

from .algebra import AlgebraDescriptor, Element, TraceValue, op_norm
from .checker import (
    AbstractDescriptor,
    AffFunction,
    ConditionCheck,
    ConditionReport,
    K0Data,
)
from .determinant import (
    Concatenation,
    ExpLine,
    InvertiblePath,
    PointwiseProduct,
    ProductPolar,
    Reversal,
    Sampled,
)
from .factorization import PositiveFactorization


# ---------------------------------------------------------------------------
# elements


def element_to_obj(x: Element):
    return {
        "blocks": [
            [[[float(v.real), float(v.imag)] for v in row] for row in b]
            for b in x.blocks
        ]
    }


def element_from_obj(obj) -> Element:
    blocks = []
    for b in obj["blocks"]:
        arr = np.array(
            [[complex(re, im) for re, im in row] for row in b], dtype=complex
        )
        blocks.append(arr)
    alg = AlgebraDescriptor(tuple(len(b) for b in blocks))
    return Element(alg, tuple(blocks))


def element_to_json(x: Element) -> str:
    return json.dumps(element_to_obj(x))


def element_from_json(text: str) -> Element:
    return element_from_obj(json.loads(text))


# ---------------------------------------------------------------------------
# paths


def path_to_obj(path: InvertiblePath):
    if isinstance(path, ExpLine):
        return {
            "kind": "ExpLine",
            "domain": list(path.domain),
            "c": element_to_obj(path.c),
        }
    if isinstance(path, ProductPolar):
        return {
            "kind": "ProductPolar",
            "domain": list(path.domain),
            "c": element_to_obj(path.c),
            "d": element_to_obj(path.d),
        }
    if isinstance(path, Sampled):
        return {
            "kind": "Sampled",
            "domain": list(path.domain),
            "samples": [[t, element_to_obj(v)] for t, v in path.samples],
        }
    if isinstance(path, PointwiseProduct):
        return {
            "kind": "PointwiseProduct",
            "domain": list(path.domain),
            "first": path_to_obj(path.first),
            "second": path_to_obj(path.second),
        }
    if isinstance(path, Concatenation):
        return {
            "kind": "Concatenation",
            "domain": list(path.domain),
            "first": path_to_obj(path.first),
            "second": path_to_obj(path.second),
        }
    if isinstance(path, Reversal):
        return {
            "kind": "Reversal",
            "domain": list(path.domain),
            "inner": path_to_obj(path.inner),
        }
    raise ValueError(f"unknown path kind {type(path).__name__}")


def path_from_obj(obj) -> InvertiblePath:
    kind = obj.get("kind")
    if kind == "ExpLine":
        return ExpLine(element_from_obj(obj["c"]), tuple(obj.get("domain", (0.0, 1.0))))
    if kind == "ProductPolar":
        return ProductPolar(
            element_from_obj(obj["c"]),
            element_from_obj(obj["d"]),
            tuple(obj.get("domain", (0.0, 1.0))),
        )
    if kind == "Sampled":
        return Sampled(
            tuple((float(t), element_from_obj(v)) for t, v in obj["samples"])
        )
    if kind == "PointwiseProduct":
        return PointwiseProduct(path_from_obj(obj["first"]), path_from_obj(obj["second"]))
    if kind == "Concatenation":
        return Concatenation(path_from_obj(obj["first"]), path_from_obj(obj["second"]))
    if kind == "Reversal":
        return Reversal(path_from_obj(obj["inner"]))
    raise ValueError(f"unknown path kind {kind!r}")


def path_to_json(path: InvertiblePath) -> str:
    return json.dumps(path_to_obj(path))


def path_from_json(text: str) -> InvertiblePath:
    return path_from_obj(json.loads(text))


# ---------------------------------------------------------------------------
# abstract descriptors and reports


def abstract_descriptor_from_obj(obj) -> AbstractDescriptor:
    rank = int(obj["rank"])
    gens = obj.get("generators")
    if gens is not None:
        k0 = K0Data(
            rank=rank,
            generators=tuple(
                (Fraction(g.get("a", "0")), Fraction(g.get("b", "0"))) for g in gens
            ),
        )
    else:
        k0 = K0Data(rank=rank)
    flags = obj.get("flags", {})
    return AbstractDescriptor(
        k0=k0,
        no_findim_reps=bool(flags.get("no_findim_reps", False)),
        stable_rank_one=bool(flags.get("stable_rank_one", False)),
        k1_trivial=bool(flags.get("k1_trivial", False)),
        rho_dense=flags.get("rho_dense"),
    )


def abstract_descriptor_to_obj(desc: AbstractDescriptor):
    obj = {"rank": desc.k0.rank}
    if desc.k0.generators is not None:
        obj["generators"] = [
            {"a": str(a), "b": str(b)} for a, b in desc.k0.generators
        ]
    flags = {
        "no_findim_reps": desc.no_findim_reps,
        "stable_rank_one": desc.stable_rank_one,
        "k1_trivial": desc.k1_trivial,
    }
    if desc.rho_dense is not None:
        flags["rho_dense"] = desc.rho_dense
    obj["flags"] = flags
    return obj


def condition_report_to_obj(report: ConditionReport):
    def check(c: ConditionCheck):
        out = {"value": c.value, "source": c.source}
        if c.witness is not None:
            out["witness"] = c.witness
        return out

    return {
        "no_findim_reps": check(report.no_findim_reps),
        "stable_rank_one": check(report.stable_rank_one),
        "k1_trivial": check(report.k1_trivial),
        "rho_dense": check(report.rho_dense),
        "apfp_verdict": report.apfp_verdict,
        "failing": sorted(report.failing_set()),
    }


def factorization_to_obj(f: PositiveFactorization):
    return {
        "factors": [element_to_obj(p) for p in f.factors],
        "residual": f.residual,
        "relative_residual": f.residual / max(1e-300, op_norm(f.target)),
        "restarts_used": f.restarts_used,
    }


def trace_value_to_obj(v: TraceValue):
    return {
        "coords": [[c.real, c.imag] for c in v.coords],
        "block_sizes": list(v.algebra.block_sizes),
    }


def aff_function_to_obj(f: AffFunction):
    return {"values": [float(v) for v in f.values]}


# ---------------------------------------------------------------------------
# CSV flattening


def flatten_for_csv(payload, prefix=""):
    """Flatten a report into (column, value) pairs; per-block complex
    vectors become block_i_re / block_i_im columns."""
    rows = []
    if isinstance(payload, dict):
        if set(payload) == {"coords", "block_sizes"}:
            for i, (re, im) in enumerate(payload["coords"]):
                rows.append((f"{prefix}block_{i}_re", re))
                rows.append((f"{prefix}block_{i}_im", im))
            return rows
        for key in payload:
            rows.extend(flatten_for_csv(payload[key], f"{prefix}{key}_"))
        return rows
    if isinstance(payload, (list, tuple)):
        if all(isinstance(v, (int, float, bool)) for v in payload):
            for i, v in enumerate(payload):
                rows.append((f"{prefix}{i}", v))
            return rows
        for i, v in enumerate(payload):
            rows.extend(flatten_for_csv(v, f"{prefix}{i}_"))
        return rows
    value = payload
    if isinstance(value, bool):
        value = int(value)
    rows.append((prefix.rstrip("_"), value))
    return rows


def payload_to_csv(payload) -> str:
    rows = flatten_for_csv(payload)
    header = ",".join(name for name, _ in rows)
    line = ",".join(repr(v) if isinstance(v, float) else str(v) for _, v in rows)
    return header + "\n" + line + "\n"
