from typing import Sequence

import numpy as np
import scipy.linalg

from utils.errors import SingularSupportError

RANK_TOLERANCE = 1e-10


def column_correlations(phi: np.ndarray, r: np.ndarray) -> np.ndarray:
    """c_j = |phi_j^H r|^2 for every column j."""
    return np.abs(phi.conj().T @ r) ** 2


def least_squares_on_support(phi: np.ndarray, support: Sequence[int], y: np.ndarray) -> np.ndarray:
    """
    Coefficients beta minimising ||y - phi[:, support] beta|| via a reduced QR.

    :raises SingularSupportError: more columns than rows, or a diagonal entry
        of R below RANK_TOLERANCE times the largest one
    """
    support = np.asarray(support, dtype=int)
    if support.size == 0:
        return np.zeros(0, dtype=complex)
    columns = phi[:, support]
    if support.size > columns.shape[0]:
        raise SingularSupportError(
            f"singular support: {support.size} columns but only {columns.shape[0]} rows"
        )
    q, r = scipy.linalg.qr(columns, mode="economic")
    diagonal = np.abs(np.diag(r))
    if diagonal.max() == 0 or diagonal.min() < RANK_TOLERANCE * diagonal.max():
        raise SingularSupportError(f"singular support {support.tolist()}")
    return scipy.linalg.solve_triangular(r, q.conj().T @ y)


def residual_update(
    y: np.ndarray, phi: np.ndarray, support: Sequence[int], beta: np.ndarray
) -> np.ndarray:
    """r = y - phi[:, support] beta."""
    support = np.asarray(support, dtype=int)
    if support.size == 0:
        return np.array(y, dtype=complex)
    return y - phi[:, support] @ beta
