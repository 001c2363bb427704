import logging
from typing import Optional, Union

from ..constraints import ConstraintFamily
from ..data_models import InstanceSequence
from .base_ocrs import GreedyOcrs
from .perfect_selector import PerfectSelector
from .subfamily_ocrs import MatchingOcrs, Rank1Ocrs
from .temporal_ocrs import TemporalOcrs

logger = logging.getLogger(__name__)

SCHEMES = ("rank1", "matching", "perfect")


def create_ocrs(scheme: str, family: ConstraintFamily, seq: Optional[InstanceSequence] = None, b: float = 1.0,
                temporal: bool = True) -> Union[GreedyOcrs, PerfectSelector]:
    """
    Factory function to create a selection scheme for a family.

    Args:
        scheme: "rank1", "matching" or "perfect".
        family: The constraint family the scheme rounds against.
        seq: The arrival sequence; required when temporal is set and for "perfect".
        b: Polytope scale the scheme is certified for.
        temporal: Whether to wrap the base scheme in the temporal reduction.

    Raises:
        ValueError: If the scheme is unknown or the arguments don't fit it.
    """
    logger.info(f"Creating OCRS '{scheme}' for a {family.kind} family (b = {b}, temporal = {temporal})")
    name = scheme.lower()
    if name == "perfect":
        if seq is None:
            raise ValueError("The perfect selector needs the arrival sequence")
        return PerfectSelector(family, seq)

    base: GreedyOcrs
    if name == "rank1":
        base = Rank1Ocrs(family, b)
    elif name == "matching":
        base = MatchingOcrs(family, b)
    else:
        logger.error(f"Unknown OCRS scheme requested: {scheme}")
        raise ValueError(f"Unknown OCRS scheme: {scheme}")

    if temporal:
        if seq is None:
            raise ValueError("The temporal reduction needs the arrival sequence")
        logger.debug(f"Wrapping {type(base).__name__} with TemporalOcrs.")
        return TemporalOcrs(base, seq)
    return base
