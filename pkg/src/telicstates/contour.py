"""Iso-level lines of a field sampled on a rectilinear grid."""

from typing import List, Tuple
import logging

import numpy as np
from contourpy import LineType, contour_generator


logger = logging.getLogger(__name__)

Point = Tuple[float, float]
Polyline = List[Point]


def iso_lines(x: np.ndarray, y: np.ndarray, field: np.ndarray,
              level: float) -> List[Polyline]:
    """
    Polylines along which `field` crosses `level`.

    `field` has shape ``(len(y), len(x))``; row `i` is sampled at `y[i]`.
    """

    field = np.asarray(field, dtype=float)
    if field.shape != (len(y), len(x)):
        raise ValueError(f"Field shape {field.shape} does not match the "
                         f"grid ({len(y)}, {len(x)}).")

    generator = contour_generator(np.asarray(x, dtype=float),
                                  np.asarray(y, dtype=float), field,
                                  line_type=LineType.Separate)
    lines = [[(float(px), float(py)) for px, py in line]
             for line in generator.lines(level)]
    logger.debug("Level %g: %d lines.", level, len(lines))
    return lines
