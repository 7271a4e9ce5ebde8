from .covering import CoveringReport, covering_check, kappa_crosses_strips, kappa_segment
from .fourarc import ArcSpec, FourArcResult, VerificationFailed, four_arc_jordan
from .nice import Disk, HalfPlane, NiceUpTo, Polygon, Violation, nice_check, parse_region
from .sector import ZeroTarget, sector_preimage
from .surround import (
    NoTransversalCrossing,
    PrecisionHorizon,
    RefinementChain,
    SearchBudget,
    SurroundCertificate,
    circle_closeness,
    refine_dense_orbit,
    replay,
    surround_from_curve,
    verify_certificate,
)

__all__ = [
    "ArcSpec", "CoveringReport", "Disk", "FourArcResult", "HalfPlane", "NiceUpTo", "NoTransversalCrossing",
    "Polygon", "PrecisionHorizon", "RefinementChain", "SearchBudget", "SurroundCertificate",
    "VerificationFailed", "Violation", "ZeroTarget", "circle_closeness", "covering_check",
    "four_arc_jordan", "kappa_crosses_strips", "kappa_segment", "nice_check", "parse_region",
    "refine_dense_orbit", "replay", "sector_preimage", "surround_from_curve", "verify_certificate",
]
