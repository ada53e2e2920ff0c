"""Assembly of the maturity x kind comparison report."""

from typing import Dict, Iterable, Mapping, Optional, Sequence
import logging

from implied_leverage.core.errors import LeverageError
from implied_leverage.models.schemas import CompareReport, GammaCurve, GammaKind

logger = logging.getLogger(__name__)


def restrict_curve(curve: GammaCurve, maturities: Sequence[int]) -> GammaCurve:
    """The sub-curve on ``maturities``; every requested maturity must be present."""
    missing = [m for m in maturities if m not in curve.maturities]
    if missing:
        raise LeverageError(
            f"{curve.kind.value} curve has no value for maturities {missing}",
            code="missing-prerequisite"
        )
    index = [curve.maturities.index(m) for m in maturities]
    return GammaCurve(
        maturities=tuple(maturities),
        gammas=tuple(curve.gammas[i] for i in index),
        std_errors=tuple(curve.std_errors[i] for i in index) if curve.std_errors is not None else None,
        kind=curve.kind
    )


def assemble_report(
    maturities: Sequence[int],
    curves: Iterable[GammaCurve],
    metadata: Optional[Mapping[str, str]] = None
) -> CompareReport:
    """
    Put curves on the shared maturity grid; kinds without a curve are marked
    absent and listed in the ``absent`` metadata line.

    Raises:
        LeverageError: missing-prerequisite, invalid-input (duplicate kind)
    """
    maturities = tuple(sorted(set(int(m) for m in maturities)))
    by_kind: Dict[GammaKind, GammaCurve] = {}
    for curve in curves:
        if curve.kind in by_kind:
            raise LeverageError(f"two {curve.kind.value} curves supplied", code="invalid-input")
        by_kind[curve.kind] = restrict_curve(curve, maturities)

    absent = tuple(kind for kind in GammaKind if kind not in by_kind)
    if absent:
        logger.info(f"Report without {', '.join(k.value for k in absent)}")
    meta = dict(metadata or {})
    meta["absent"] = ",".join(k.value for k in absent) or "none"
    return CompareReport(
        maturities=maturities,
        curves=by_kind,
        absent=absent,
        metadata=meta
    )
