from dataclasses import dataclass


@dataclass(frozen=True)
class AnalysisConfig:
    unroll: int = 2
    recursion_depth: int = 2
    aux_depth: int = 3
    path_insensitive: bool = False
    jobs: int = 1
