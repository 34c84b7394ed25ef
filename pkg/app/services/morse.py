# --------------------------------------------------
# Morse relations for geodesic counts
#
# sum_i n_i L^i = P(L) + (1 + L) Q(L) with Q having nonnegative coefficients:
# q_i = n_i - p_i - q_{i-1} is computed greedily up to the degree cap and
# every q_i must be >= 0. Counts from shooting are lower bounds, so a
# violation usually flags an incomplete run.
# --------------------------------------------------

import logging
from typing import Dict, Mapping

from app.models.geometry import MorseVerdict

logger = logging.getLogger(__name__)


def _coefficients(series: Mapping) -> Dict[int, int]:
    return {int(k): int(v) for k, v in series.items()}


def morse_relations_check(counts: Mapping, poincare: Mapping, degree_cap: int) -> MorseVerdict:
    counts, poincare = _coefficients(counts), _coefficients(poincare)
    q, previous = [], 0
    for degree in range(degree_cap + 1):
        current = counts.get(degree, 0) - poincare.get(degree, 0) - previous
        if current < 0:
            logger.warning(f"Morse relations violated at degree {degree}: q_{degree} = {current}")
            return MorseVerdict(holds=False, q=q, violated_degree=degree)
        q.append(current)
        previous = current
    logger.info(f"Morse relations hold up to degree {degree_cap} with Q = {q}")
    return MorseVerdict(holds=True, q=q)
