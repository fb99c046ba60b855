"""SO(3) kernel: skew/axial maps, the Rodrigues exponential, its tangent
(differential) map, and the multiplicative rotation update.

All functions accept either a single 3-vector / 3x3 matrix or stacked arrays
with the vector/matrix axes last, and are branch-stable near zero angle.
"""

from __future__ import annotations

import numpy as np

# Below this angle the closed forms lose digits to cancellation (the
# (theta - sin theta)/theta^3 factor loses ~6*eps/theta^2 relative accuracy),
# so both exp and dexp switch to a Taylor series through theta^6, accurate to
# ~1e-16 at the threshold.
SMALL_ANGLE = 0.05

_ORTHO_DRIFT_TOL = 1e-9


def skew(a: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix S with S @ h = a x h."""
    a = np.asarray(a, dtype=float)
    out = np.zeros(a.shape[:-1] + (3, 3))
    x, y, z = a[..., 0], a[..., 1], a[..., 2]
    out[..., 0, 1] = -z
    out[..., 0, 2] = y
    out[..., 1, 0] = z
    out[..., 1, 2] = -x
    out[..., 2, 0] = -y
    out[..., 2, 1] = x
    return out


def axial(S: np.ndarray) -> np.ndarray:
    """Axial vector of a skew-symmetric matrix (inverse of :func:`skew`)."""
    S = np.asarray(S, dtype=float)
    return np.stack([S[..., 2, 1], S[..., 0, 2], S[..., 1, 0]], axis=-1)


def cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product over the last axis; cheaper than np.cross for the hot
    per-step paths (no axis juggling)."""
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    out[..., 0] = a1 * b2 - a2 * b1
    out[..., 1] = a2 * b0 - a0 * b2
    out[..., 2] = a0 * b1 - a1 * b0
    return out


def _sin_cos_factors(theta):
    """(sin t / t, (1 - cos t)/t^2) with series fallback below SMALL_ANGLE."""
    t2 = theta * theta
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    a = np.where(small,
                 1.0 + t2 * (-1.0 / 6.0 + t2 * (1.0 / 120.0 - t2 / 5040.0)),
                 np.sin(safe) / safe)
    # 2 sin^2(t/2) / t^2 avoids the 1 - cos cancellation
    half = 0.5 * safe
    b = np.where(small,
                 0.5 + t2 * (-1.0 / 24.0 + t2 * (1.0 / 720.0 - t2 / 40320.0)),
                 2.0 * (np.sin(half) / safe) ** 2)
    return a, b


def exp_so3(theta_vec: np.ndarray) -> np.ndarray:
    """Rodrigues closed-form exponential map so(3) -> SO(3)."""
    v = np.asarray(theta_vec, dtype=float)
    theta = np.linalg.norm(v, axis=-1)
    a, b = _sin_cos_factors(theta)
    S = skew(v)
    S2 = S @ S
    eye = np.broadcast_to(np.eye(3), S.shape)
    return eye + a[..., None, None] * S + b[..., None, None] * S2


def dexp_so3(theta_vec: np.ndarray) -> np.ndarray:
    """Tangent map T of the exponential (spatial/left convention).

    T satisfies exp((v + d)~) = (I + (T(v) d)~) exp(v~) + O(|d|^2), i.e. it
    converts derivatives of the rotation-vector field into the spatial
    increment rate. T = I + (1-cos t)/t^2 S + (t - sin t)/t^3 S^2.
    """
    v = np.asarray(theta_vec, dtype=float)
    theta = np.linalg.norm(v, axis=-1)
    t2 = theta * theta
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    _, b = _sin_cos_factors(theta)
    c = np.where(small,
                 1.0 / 6.0 + t2 * (-1.0 / 120.0 + t2 * (1.0 / 5040.0 - t2 / 362880.0)),
                 (safe - np.sin(safe)) / safe ** 3)
    S = skew(v)
    S2 = S @ S
    eye = np.broadcast_to(np.eye(3), S.shape)
    return eye + b[..., None, None] * S + c[..., None, None] * S2


def dexp_so3_derivative(theta_vec: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Directional derivative dT(theta)[delta] of the tangent map.

    Needed to transport the arc-length derivative of the curvature field:
    d/ds T(theta(s)) = dT(theta)[theta,s]. Smooth at zero angle via series
    for the scalar coefficient derivatives.
    """
    v = np.asarray(theta_vec, dtype=float)
    d = np.asarray(delta, dtype=float)
    theta = np.linalg.norm(v, axis=-1)
    t2 = theta * theta
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    _, b = _sin_cos_factors(theta)
    c = np.where(small,
                 1.0 / 6.0 + t2 * (-1.0 / 120.0 + t2 * (1.0 / 5040.0 - t2 / 362880.0)),
                 (safe - np.sin(safe)) / safe ** 3)
    # b'(t)/t and c'(t)/t, series-stabilized
    bp = np.where(small,
                  -1.0 / 12.0 + t2 * (1.0 / 180.0 - t2 / 6720.0),
                  (safe * np.sin(safe) - 2.0 * (1.0 - np.cos(safe))) / safe ** 4)
    cp = np.where(small,
                  -1.0 / 60.0 + t2 * (1.0 / 1260.0 - t2 / 60480.0),
                  ((1.0 - np.cos(safe)) * safe - 3.0 * (safe - np.sin(safe)))
                  / safe ** 5)
    vd = np.einsum("...i,...i->...", v, d)
    S = skew(v)
    S2 = S @ S
    D = skew(d)
    return (bp[..., None, None] * vd[..., None, None] * S
            + b[..., None, None] * D
            + cp[..., None, None] * vd[..., None, None] * S2
            + c[..., None, None] * (D @ S + S @ D))


def orthonormality_defect(R: np.ndarray) -> float:
    """max-norm of R^T R - I over all stacked rotations."""
    R = np.asarray(R, dtype=float)
    g = np.swapaxes(R, -1, -2) @ R - np.eye(3)
    return float(np.abs(g).max())


def project_to_so3(R: np.ndarray) -> np.ndarray:
    """Nearest rotation in the Frobenius sense (polar projection via SVD)."""
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=float))
    P = U @ Vt
    # keep det = +1 (relevant only for badly corrupted inputs)
    det = np.linalg.det(P)
    if np.any(det < 0):
        U = U.copy()
        U[..., :, -1] *= np.where(det < 0, -1.0, 1.0)[..., None]
        P = U @ Vt
    return P


def update_rotation(R_prev: np.ndarray, theta_vec: np.ndarray) -> np.ndarray:
    """Left-multiplicative update R = exp(theta~) R_prev.

    The Rodrigues formula is orthogonal in exact arithmetic; the result is
    re-projected only if the accumulated drift exceeds 1e-9, so a projection
    never hides an update bug.
    """
    R = exp_so3(theta_vec) @ np.asarray(R_prev, dtype=float)
    if orthonormality_defect(R) > _ORTHO_DRIFT_TOL:
        R = project_to_so3(R)
    return R
