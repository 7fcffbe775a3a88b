"""Single-letter rate regions, the instrument resource breakdown and the
uncertainty-relation lower bounds."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from measim import tolerances as tol
from measim.cq import (
    ClassicalQuantumState,
    Ensemble,
    Povm,
    QuantumInstrument,
    Refinement,
    apply_refinement,
    cq_joint,
    post_measurement_cq,
    transpose_trick_states,
    trivial_refinement,
)
from measim.errors import BadLayout, BadRefinement, DimMismatch
from measim.qcore import (
    SystemLayout,
    as_density,
    canonical_eigh,
    canonical_purification,
    conditional_entropy,
    conditional_mutual_information,
    entropy,
    hermitize,
    mutual_information,
    spectral_norm,
    von_neumann_entropy,
)

GRID_STEP = 1e-3


@dataclass(frozen=True)
class Constraint:
    """Half-plane ``a·R + b·S ≥ value``."""

    a: float
    b: float
    value: float
    source: str

    def slack(self, r: float, s: float) -> float:
        return self.a * r + self.b * s - self.value


@dataclass(frozen=True)
class RateRegion:
    constraints: tuple
    corner: tuple
    quantities: dict = field(default_factory=dict)

    def __post_init__(self):
        for c in self.constraints:
            if not np.isfinite(c.value):
                raise ValueError(f"constraint {c.source} is not finite")
            if c.slack(*self.corner) < -tol.TOL_ENTROPY:
                raise ValueError(f"corner violates {c.source}")

    def contains(self, r: float, s: float, atol: float = tol.TOL_ENTROPY) -> bool:
        return all(c.slack(r, s) >= -atol for c in self.constraints)

    def to_dict(self) -> dict:
        return {
            "constraints": [
                {"a": c.a, "b": c.b, "value": c.value, "source": c.source} for c in self.constraints
            ],
            "corner": {"R": self.corner[0], "S": self.corner[1]},
            "quantities": dict(self.quantities),
        }


@dataclass(frozen=True)
class RegionUnion:
    """Union of per-refinement regions; an inner bound on the full union."""

    members: tuple
    corner: tuple
    envelope: tuple
    inner_bound: bool = True

    def contains(self, r: float, s: float, atol: float = tol.TOL_ENTROPY) -> bool:
        return any(m.contains(r, s, atol) for m in self.members)

    def to_dict(self) -> dict:
        return {
            "members": [m.to_dict() for m in self.members],
            "corner": {"R": self.corner[0], "S": self.corner[1]},
            "envelope": [{"R": r, "S": s} for r, s in self.envelope],
            "inner_bound": self.inner_bound,
        }


def _clean(v: float) -> float:
    """Round away sub-tolerance noise so that exact zeros print as 0."""
    return 0.0 if abs(v) < 1e-13 else float(v)


def _two_constraint_region(r_val: float, sum_val: float, r_name: str, s_name: str, extra: dict) -> RateRegion:
    r_val, sum_val = _clean(r_val), _clean(sum_val)
    cons = (
        Constraint(1.0, 0.0, r_val, f"R >= {r_name}"),
        Constraint(1.0, 1.0, sum_val, f"R + S >= {s_name}"),
    )
    return RateRegion(cons, (r_val, _clean(sum_val - r_val)), {k: _clean(v) for k, v in extra.items()})


def feedback_cq_state(rho, povm: Povm) -> ClassicalQuantumState:
    return transpose_trick_states(rho, povm)


def mc_feedback_region(rho, povm: Povm) -> RateRegion:
    """``R ≥ I(X;R)``, ``R + S ≥ H(X)``; corner ``(I(X;R), H(X|R))``."""
    cq = transpose_trick_states(rho, povm)
    joint, lay = cq.joint("X")
    h_x = entropy(joint, lay, "X")
    i_xr = mutual_information(joint, lay, "X", "R")
    h_x_r = conditional_entropy(joint, lay, "X", "R")
    q = {"I(X;R)": i_xr, "H(X)": h_x, "H(X|R)": h_x_r, "H(R)": entropy(joint, lay, "R")}
    return _two_constraint_region(i_xr, h_x, "I(X;R)", "H(X)", q)


def _reference_blocks(rho, elements) -> list[np.ndarray]:
    """Unnormalized ``√ρ E^T √ρ`` on R for each effect E."""
    r = as_density(rho)
    w, v = canonical_eigh(r)
    sq = np.sqrt(np.clip(w, 0.0, None))
    return [hermitize(sq[:, None] * (v.conj().T @ e @ v).T * sq[None, :]) for e in elements]


def instrument_feedback_rates(rho, instr: QuantumInstrument) -> tuple[RateRegion, dict]:
    """Region on the (X, R) state and the (X, Y, R) resource breakdown."""
    r = as_density(rho)
    if r.shape[0] != instr.dim:
        raise DimMismatch(f"state dim {r.shape[0]} != instrument dim {instr.dim}")
    ny = max(len(f) for f in instr.kraus)
    effects, idx = [], []
    for x, fam in enumerate(instr.kraus):
        for y, k in enumerate(fam):
            effects.append(k.conj().T @ k)
            idx.append((x, y))
    blocks = _reference_blocks(r, effects)
    ref = SystemLayout((r.shape[0],), ("R",))
    joint, lay = cq_joint(list(zip(idx, blocks)), (len(instr.kraus), ny), ("X", "Y"), ref)
    breakdown = {
        "I(X;R)": _clean(mutual_information(joint, lay, "X", "R")),
        "I(Y;R|X)": _clean(conditional_mutual_information(joint, lay, "Y", "R", "X")),
        "H(X|R)": _clean(conditional_entropy(joint, lay, "X", "R")),
        "H(Y|XR)": _clean(conditional_entropy(joint, lay, "Y", "XR")),
        "I(XY;R)": _clean(mutual_information(joint, lay, "XY", "R")),
    }
    region = mc_feedback_region(r, instr.povm())
    return region, breakdown


def _refinement_entries(blocks, post: np.ndarray):
    entries = []
    nx, nw = post.shape
    for w in range(nw):
        for x in range(nx):
            if post[x, w] > 0:
                entries.append(((w, x), post[x, w] * blocks[w]))
    return entries


def _check_refinements(refinements, target: Povm | None) -> tuple[Povm, list[Refinement]]:
    if not refinements and target is None:
        raise BadRefinement("need at least one refinement or a target POVM")
    base = target if target is not None else apply_refinement(refinements[0])
    for i, ref in enumerate(refinements):
        got = apply_refinement(ref)
        if len(got) != len(base) or got.dim != base.dim:
            raise BadRefinement(f"refinement {i} has a different outcome alphabet")
        gap = max(spectral_norm(a - b) for a, b in zip(got.elements, base.elements))
        if gap > tol.TOL_REFINE:
            raise BadRefinement(f"refinement {i} reconstructs the POVM only within {gap:.2e}")
    return base, [trivial_refinement(base)] + list(refinements)


def _union(members: list[RateRegion], r_key: str, sum_key: str) -> RegionUnion:
    best = min(members, key=lambda m: (round(m.corner[0] + m.corner[1], 12), round(m.corner[0], 12)))
    top = max(m.quantities[sum_key] for m in members)
    lo = min(m.quantities[r_key] for m in members)
    grid = np.round(np.arange(0.0, max(top, lo) + GRID_STEP, GRID_STEP), 12)
    pts = sorted(set(grid.tolist()) | {m.quantities[r_key] for m in members})
    env = []
    for rr in pts:
        vals = [m.quantities[sum_key] - rr for m in members if rr >= m.quantities[r_key] - 1e-12]
        if vals:
            env.append((float(rr), _clean(min(vals))))
    return RegionUnion(tuple(members), best.corner, tuple(env))


def mc_nonfeedback_region(rho, refinements, target: Povm | None = None) -> RegionUnion:
    """Union over refinements (plus W = X) of ``R ≥ I(W;R)``, ``R+S ≥ I(W;XR)``."""
    r = as_density(rho)
    base, refs = _check_refinements(list(refinements), target)
    if base.dim != r.shape[0]:
        raise DimMismatch("state and POVM dimensions differ")
    ref_layout = SystemLayout((r.shape[0],), ("R",))
    members = []
    for ref in refs:
        xi = ref.internal_povm
        blocks = _reference_blocks(r, xi.elements)
        entries = _refinement_entries(blocks, ref.post)
        joint, lay = cq_joint(entries, (len(xi), ref.post.shape[0]), ("W", "X"), ref_layout)
        markov = conditional_mutual_information(joint, lay, "X", "R", "W")
        if markov > tol.TOL_ENTROPY:
            raise BadRefinement(f"I(X;R|W) = {markov:.3e} on the constructed state")
        i_wr = mutual_information(joint, lay, "W", "R")
        i_wxr = mutual_information(joint, lay, "W", "XR")
        q = {"I(W;R)": i_wr, "I(W;XR)": i_wxr, "I(X;R|W)": markov, "I(X;R)": mutual_information(joint, lay, "X", "R")}
        members.append(_two_constraint_region(i_wr, i_wxr, "I(W;R)", "I(W;XR)", q))
    return _union(members, "I(W;R)", "I(W;XR)")


def cdc_qsi_rate(cq) -> float:
    """H(X|B) for a cq state or an ensemble."""
    if isinstance(cq, Ensemble):
        blocks = tuple((str(i), p, s) for i, (p, s) in enumerate(zip(cq.pmf, cq.states)))
        cq = ClassicalQuantumState(blocks, SystemLayout((cq.dim,), ("B",)))
    joint, lay = cq.joint("X")
    return _clean(conditional_entropy(joint, lay, "X", tuple(cq.layout.labels)))


def ab_ordered(rho_ab, layout: SystemLayout) -> tuple[np.ndarray, int, int]:
    r = as_density(rho_ab)
    layout.check(r)
    if set(layout.labels) != {"A", "B"}:
        raise BadLayout(f"layout must have exactly the labels A and B, got {layout.labels}")
    da, db = layout.dims[layout.index("A")], layout.dims[layout.index("B")]
    if layout.labels[0] == "B":
        t = r.reshape(db, da, db, da).transpose(1, 0, 3, 2)
        r = t.reshape(da * db, da * db)
    return r, da, db


def rab_purification(rho_ab, layout: SystemLayout) -> tuple[np.ndarray, SystemLayout]:
    """Canonical purification of ρ^{AB} as a pure density on (R, A, B)."""
    r, da, db = ab_ordered(rho_ab, layout)
    phi = canonical_purification(r)
    dr = da * db
    return phi.density(), SystemLayout((dr, da, db), ("R", "A", "B"))


def mcqsi_state(rho_ab, layout: SystemLayout, povm: Povm) -> tuple[np.ndarray, SystemLayout]:
    """``Σ_x |x⟩⟨x| ⊗ Tr_A{Λ_x φ^{RAB}}`` on (X, R, B)."""
    phi, lay = rab_purification(rho_ab, layout)
    if povm.dim != lay.dims[1]:
        raise DimMismatch("POVM does not act on A")
    cq = post_measurement_cq(povm, phi, lay, "A")
    return cq.joint("X")


def mcqsi_feedback_region(rho_ab, layout: SystemLayout, povm: Povm) -> RateRegion:
    """``R ≥ I(X;R|B)``, ``R + S ≥ H(X|B)``; corner ``(I(X;R|B), H(X|RB))``."""
    joint, lay = mcqsi_state(rho_ab, layout, povm)
    i_xr_b = conditional_mutual_information(joint, lay, "X", "R", "B")
    h_x_b = conditional_entropy(joint, lay, "X", "B")
    q = {
        "I(X;R|B)": i_xr_b,
        "H(X|B)": h_x_b,
        "H(X|RB)": conditional_entropy(joint, lay, "X", "RB"),
        "I(X;RB)": mutual_information(joint, lay, "X", "RB"),
    }
    return _two_constraint_region(i_xr_b, h_x_b, "I(X;R|B)", "H(X|B)", q)


def mcqsi_nonfeedback_region(rho_ab, layout: SystemLayout, refinements, target: Povm | None = None) -> RegionUnion:
    """Union of ``R ≥ I(W;R|B)``, ``R + S ≥ I(W;XR|B)`` over refinements."""
    phi, lay = rab_purification(rho_ab, layout)
    base, refs = _check_refinements(list(refinements), target)
    if base.dim != lay.dims[1]:
        raise DimMismatch("POVM does not act on A")
    rb = lay.sub(("R", "B"))
    members = []
    for ref in refs:
        xi = ref.internal_povm
        cq = post_measurement_cq(xi, phi, lay, "A")
        blocks = [w * s for w, s in zip(cq.weights, cq.states)]
        entries = _refinement_entries(blocks, ref.post)
        joint, jl = cq_joint(entries, (len(xi), ref.post.shape[0]), ("W", "X"), rb)
        i_wr_b = conditional_mutual_information(joint, jl, "W", "R", "B")
        i_wxr_b = conditional_mutual_information(joint, jl, "W", "XR", "B")
        q = {"I(W;R|B)": i_wr_b, "I(W;XR|B)": i_wxr_b, "I(X;RB|W)": conditional_mutual_information(joint, jl, "X", "RB", "W")}
        members.append(_two_constraint_region(i_wr_b, i_wxr_b, "I(W;R|B)", "I(W;XR|B)", q))
    return _union(members, "I(W;R|B)", "I(W;XR|B)")


@dataclass(frozen=True)
class UncertaintyReport:
    c1: float
    c2: float
    lhs_total_cost: float
    lhs_total_cr: float
    bound_cost: float
    bound_cr: float
    h_a: float

    @property
    def cost_ok(self) -> bool:
        return self.lhs_total_cost >= self.bound_cost - tol.TOL_LEMMA

    @property
    def cr_ok(self) -> bool:
        return self.lhs_total_cr >= self.bound_cr - tol.TOL_LEMMA

    def to_dict(self) -> dict:
        return {
            "c1": self.c1,
            "c2": self.c2,
            "lhs_total_cost": self.lhs_total_cost,
            "lhs_total_cr": self.lhs_total_cr,
            "bound_cost": self.bound_cost,
            "bound_cr": self.bound_cr,
            "H(A)": self.h_a,
            "cost_ok": self.cost_ok,
            "cr_ok": self.cr_ok,
        }


def overlap_constants(povm_x: Povm, povm_z: Povm) -> tuple[float, float]:
    """``c₁ = max ‖√Λ_x √Γ_z‖²_∞`` and ``c₂ = max √Tr{Λ_x Γ_z}``."""
    from measim.qcore import psd_sqrt

    rx = [psd_sqrt(e) for e in povm_x.elements]
    rz = [psd_sqrt(e) for e in povm_z.elements]
    c1 = max(spectral_norm(a @ b) ** 2 for a in rx for b in rz)
    c2 = max(np.sqrt(max(float(np.real(np.trace(a @ b))), 0.0)) for a in povm_x.elements for b in povm_z.elements)
    return float(c1), float(c2)


def uncertainty_bounds(rho_abc, layout: SystemLayout, povm_x: Povm, povm_z: Povm) -> UncertaintyReport:
    r = as_density(rho_abc)
    layout.check(r)
    if set(layout.labels) != {"A", "B", "C"}:
        raise BadLayout("layout must have exactly the labels A, B, C")
    da = layout.dims[layout.index("A")]
    if povm_x.dim != da or povm_z.dim != da:
        raise DimMismatch("both POVMs must act on A")
    c1, c2 = overlap_constants(povm_x, povm_z)
    phi = canonical_purification(r)
    full = SystemLayout((r.shape[0],) + layout.dims, ("R",) + layout.labels)
    rho_full = phi.density()
    jx, lx = post_measurement_cq(povm_x, rho_full, full, "A").joint("X")
    jz, lz = post_measurement_cq(povm_z, rho_full, full, "A").joint("Z")
    cost = conditional_entropy(jx, lx, "X", "B") + conditional_entropy(jz, lz, "Z", "C")
    cr = conditional_entropy(jx, lx, "X", ("R", "B", "C")) + conditional_entropy(jz, lz, "Z", ("R", "B", "C"))
    h_a = entropy(rho_full, full, "A")
    return UncertaintyReport(
        c1, c2, float(cost), float(cr), float(np.log2(1.0 / c1)), float(max(np.log2(1.0 / c2) - h_a, 0.0)), float(h_a)
    )


def prescribed_sizes(rho, povm: Povm, n: int, delta: float) -> tuple[int, int]:
    """``L = ⌈2^{n[I(X;R)+3δ]}⌉`` and ``M = ⌈2^{n[H(X|R)+δ]}⌉``."""
    reg = mc_feedback_region(rho, povm)
    q = reg.quantities
    return (
        int(np.ceil(2.0 ** (n * (q["I(X;R)"] + 3 * delta)) - 1e-9)),
        int(np.ceil(2.0 ** (n * (q["H(X|R)"] + delta)) - 1e-9)),
    )


__all__ = [
    "Constraint",
    "RateRegion",
    "RegionUnion",
    "UncertaintyReport",
    "mc_feedback_region",
    "instrument_feedback_rates",
    "mc_nonfeedback_region",
    "cdc_qsi_rate",
    "mcqsi_feedback_region",
    "mcqsi_nonfeedback_region",
    "uncertainty_bounds",
    "overlap_constants",
    "prescribed_sizes",
    "von_neumann_entropy",
]
