"""Numerical tolerances and the ambient size cap."""

import os

from measim.errors import SizeLimit

TOL_HERM = 1e-9
TOL_PSD = 1e-9
TOL_TRACE = 1e-9
TOL_NORM = 1e-9
TOL_ENTROPY = 1e-8
TOL_RECON = 1e-8
TOL_COMPLETE = 1e-8
TOL_REFINE = 1e-8
TOL_PROJ = 1e-9
TOL_LEMMA = 1e-8
RANK_TOL = 1e-7
DEGENERACY_TOL = 1e-12
# slack on typicality comparisons so that exact rational matches survive rounding
TYPICALITY_SLACK = 1e-12

DEFAULT_MAX_AMBIENT = 2**20


def as_dict() -> dict:
    return {
        "tol_herm": TOL_HERM,
        "tol_psd": TOL_PSD,
        "tol_trace": TOL_TRACE,
        "tol_norm": TOL_NORM,
        "tol_entropy": TOL_ENTROPY,
        "tol_recon": TOL_RECON,
        "tol_complete": TOL_COMPLETE,
        "tol_refine": TOL_REFINE,
        "tol_proj": TOL_PROJ,
        "tol_lemma": TOL_LEMMA,
        "rank_tol": RANK_TOL,
        "degeneracy_tol": DEGENERACY_TOL,
        "max_ambient": max_ambient(),
    }


def max_ambient() -> int:
    """Cap on enumerated sequences / ambient amplitudes, overridable by env."""
    raw = os.environ.get("MEASIM_MAX_AMBIENT_DIM")
    if raw is None or raw.strip() == "":
        return DEFAULT_MAX_AMBIENT
    return int(raw)


def check_size(what: str, size: int) -> None:
    cap = max_ambient()
    if size > cap:
        raise SizeLimit(what, int(size), cap)
