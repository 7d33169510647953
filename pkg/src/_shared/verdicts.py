from typing import Literal

Verdict = Literal["pass", "fail", "inconclusive"]

# A violation counts only beyond this many standard errors.
SE_MULTIPLIER = 3.0


def decide(margin: float, se: float) -> Verdict:
    """``pass`` for a non-negative margin, ``fail`` below ``-3 SE``."""
    if margin >= 0.0:
        return "pass"
    if margin >= -SE_MULTIPLIER * se:
        return "inconclusive"
    return "fail"


def combine(verdicts: list[Verdict]) -> Verdict:
    if "fail" in verdicts:
        return "fail"
    if "inconclusive" in verdicts:
        return "inconclusive"
    return "pass"


def agree(difference: float, se: float) -> Verdict:
    """Equality check: ``pass`` while ``|difference|`` stays within ``3 SE``."""
    return "pass" if abs(difference) <= SE_MULTIPLIER * se else "fail"
