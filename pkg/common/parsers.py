"""
Single source of truth for parsing command-line literals
"""
import math
import re
from fractions import Fraction
from typing import List

from common.errors import InvalidParameterError

# 2^-5, 2**-5, 2^(-5)
POWER_PATTERNS = [
    r'^\s*(\d+)\s*\^\s*\(?\s*(-?\d+)\s*\)?\s*$',
    r'^\s*(\d+)\s*\*\*\s*\(?\s*(-?\d+)\s*\)?\s*$',
]


class LiteralParser:
    """Parse step-size and dimension lists from flag values"""

    @staticmethod
    def parse_real(text: str) -> float:
        """Parse `2^-k` power literals (exact for dyadic steps) or plain decimals"""
        for pattern in POWER_PATTERNS:
            match = re.match(pattern, text)
            if match:
                base, exponent = int(match.group(1)), int(match.group(2))
                if base <= 0:
                    raise InvalidParameterError(f"Non-positive base in literal '{text}'")
                return float(Fraction(base) ** exponent)
        try:
            value = float(Fraction(text.strip()))
        except (ValueError, ZeroDivisionError):
            raise InvalidParameterError(f"Cannot parse number '{text}'")
        if not math.isfinite(value):
            raise InvalidParameterError(f"Non-finite number '{text}'")
        return value

    @staticmethod
    def parse_real_list(text: str) -> List[float]:
        items = [item for item in text.split(',') if item.strip()]
        if not items:
            raise InvalidParameterError("Empty list")
        return [LiteralParser.parse_real(item) for item in items]

    @staticmethod
    def parse_int_list(text: str) -> List[int]:
        items = [item.strip() for item in text.split(',') if item.strip()]
        if not items:
            raise InvalidParameterError("Empty list")
        try:
            return [int(item) for item in items]
        except ValueError:
            raise InvalidParameterError(f"Cannot parse integer list '{text}'")

    @staticmethod
    def steps_for_horizon(horizon: float, h: float) -> int:
        """N = T/h, required to be integral"""
        if h <= 0:
            raise InvalidParameterError(f"Step size must be positive, got {h}")
        n_steps = round(horizon / h)
        if n_steps < 1 or abs(n_steps * h - horizon) > 1e-9 * max(1.0, abs(horizon)):
            raise InvalidParameterError(f"T={horizon} is not an integer multiple of h={h}")
        return n_steps
