from typing import Tuple, TypedDict


class Verdict(TypedDict):
    id: str
    passed: bool
    hard: bool
    worst_margin: float
    tolerance: float
    t_range: Tuple[float, float]
    detail: str


class CheckRow(TypedDict):
    check: str
    suite: str
    measured: float
    bound: float
    margin: float
    passed: bool
    detail: str

