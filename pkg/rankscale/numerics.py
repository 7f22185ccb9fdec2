"""
임베딩 행렬 spectrum 계산

[주요 기능]
1. singular_values: D x K 임베딩 행렬의 특이값 (K x K Gram 행렬 고유값 경로)
2. gram_eigenvalues_oracle: 작은 행렬용 cyclic Jacobi 고유값 오라클 (테스트 교차검증용)
3. frobenius_norm

Gram 행렬 고유값은 numpy.linalg.eigvalsh (LAPACK syevd: 대칭 tridiagonal 변환 +
implicit QR)로 구합니다. D ~ 30,000, K <= 1536 에서 O(DK^2 + K^3) 입니다.
작은 특이값의 상대 정밀도는 sigma_max 기준으로 떨어지지만 RankMe 엔트로피는
큰 특이값이 지배하므로 허용합니다.
"""
import logging
import math

import numpy as np

from .errors import InvalidInputError

logger = logging.getLogger(__name__)

# 오라클 크기 제한
ORACLE_MAX_COLS = 64
ORACLE_TOLERANCE = 1e-14
ORACLE_MAX_SWEEPS = 100


def as_matrix(m) -> np.ndarray:
    """입력을 2차원 float64 행렬로 변환하고 유효성 검사"""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"2차원 행렬이 필요합니다 (ndim={arr.ndim})")
    rows, cols = arr.shape
    if rows < 1 or cols < 1:
        raise InvalidInputError(f"빈 행렬입니다 (shape={arr.shape})")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("행렬에 NaN/Inf 값이 있습니다")
    return arr


def gram_matrix(m) -> np.ndarray:
    """M^T M (열 x 열). 세로로 긴 방향(rows >= cols)으로 맞춰서 계산"""
    arr = as_matrix(m)
    if arr.shape[0] < arr.shape[1]:
        arr = arr.T
    # float64 BLAS 누적
    return arr.T @ arr


def singular_values(m) -> np.ndarray:
    """
    min(rows, cols) 개의 특이값을 내림차순으로 반환

    rows < cols 이면 내부적으로 전치합니다. 반올림으로 생긴 음수 고유값은 0으로 clamp.
    """
    gram = gram_matrix(m)
    eigenvalues = np.linalg.eigvalsh(gram)
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    return np.sqrt(eigenvalues)[::-1].copy()


def _fsum_gram(arr: np.ndarray) -> np.ndarray:
    """math.fsum 으로 정확하게 누적한 Gram 행렬 (오라클 전용, BLAS 미사용)"""
    cols = arr.shape[1]
    gram = np.empty((cols, cols), dtype=np.float64)
    for i in range(cols):
        for j in range(i, cols):
            value = math.fsum(arr[:, i] * arr[:, j])
            gram[i, j] = value
            gram[j, i] = value
    return gram


def _jacobi_eigenvalues(a: np.ndarray) -> np.ndarray:
    """대칭 행렬의 고유값 (cyclic Jacobi rotation)"""
    a = a.copy()
    n = a.shape[0]
    threshold = ORACLE_TOLERANCE * np.linalg.norm(a, 'fro')

    for sweep in range(ORACLE_MAX_SWEEPS):
        off_diagonal = a - np.diag(np.diag(a))
        if np.sqrt(np.sum(off_diagonal ** 2)) <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q

                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
    else:
        logger.warning(f"⚠️ Jacobi 오라클이 {ORACLE_MAX_SWEEPS} sweep 안에 수렴하지 않았습니다")

    return np.diag(a).copy()


def gram_eigenvalues_oracle(m) -> np.ndarray:
    """
    작은 행렬(cols <= 64)용 독립 오라클

    fsum 으로 Gram 행렬을 만들고 cyclic Jacobi 로 off-diagonal norm < 1e-14 * ||G||_F
    까지 회전한 뒤 sqrt 내림차순 spectrum 을 반환합니다.
    """
    arr = as_matrix(m)
    if arr.shape[0] < arr.shape[1]:
        arr = arr.T
    if arr.shape[1] > ORACLE_MAX_COLS:
        raise InvalidInputError(
            f"오라클은 cols <= {ORACLE_MAX_COLS} 만 지원합니다 (cols={arr.shape[1]})"
        )
    eigenvalues = _jacobi_eigenvalues(_fsum_gram(arr))
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    return np.sort(np.sqrt(eigenvalues))[::-1].copy()


def frobenius_norm(m) -> float:
    """sqrt(sum of squared entries)"""
    return float(np.linalg.norm(as_matrix(m), 'fro'))
