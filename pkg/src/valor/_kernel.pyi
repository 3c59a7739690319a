"""Type stubs for the compiled Monte Carlo core."""

import numpy as np

BLOCK: int
MAX_POINTS: int

def run_points(
    D: float,
    r_v: float,
    dt: float,
    seed: int,
    rep: int,
    M: int,
    tx_radial_offset: float,
    tx_uniform: int,
    record_every: int,
    two_v: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    first_rec: np.ndarray,
    last_rec: np.ndarray,
    max_samples: int,
    n_threads: int,
) -> np.ndarray: ...

def run_positions(
    D: float,
    r_v: float,
    v_avg: float,
    dt: float,
    seed: int,
    rep: int,
    M: int,
    tx_radial_offset: float,
    tx_uniform: int,
    n_steps: int,
    n_threads: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]: ...

def normals3(
    seed: int, rep: int, pid: np.ndarray, step: int, attempt: int = 0
) -> tuple[np.ndarray, np.ndarray, np.ndarray]: ...
