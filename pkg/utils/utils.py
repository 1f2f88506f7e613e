from decimal import Decimal
from fractions import Fraction
import logging
from typing import Any, Optional

import numpy as np

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"


def configure_logging(level: str = "WARNING") -> None:
    """Install the project log format on the root logger once."""
    root = logging.getLogger()
    if not root.handlers:
        logging.basicConfig(level=level.upper(), format=LOG_FORMAT)
    else:
        root.setLevel(level.upper())


def format_real(value: float) -> str:
    """Shortest round-tripping positional rendering, never scientific notation."""
    return np.format_float_positional(value, unique=True, trim="-")


def format_decimal(value: Optional[Decimal]) -> str:
    if value is None:
        return ""
    return format(value, "f")


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_real(value)
    if isinstance(value, Decimal):
        return format_decimal(value)
    if isinstance(value, Fraction):
        return format_real(float(value))
    return str(value)
