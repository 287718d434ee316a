"""Hot numeric kernels, each in a numba and a pure numpy variant.

Three operations dominate runtime: applying the (2d+1)-point Dirichlet
stencil inside conjugate gradient iterations, scanning the two-tap linear
recurrences that advance the memory variable over long step sequences, and
solving the tridiagonal systems of the radial cell problem.

The active variant is chosen once at import from MEMOSTRANGE_BACKEND:

    auto   use numba when importable, numpy otherwise (default)
    numba  require numba, fail loudly if it is missing
    numpy  force the pure numpy path

Both variants stay importable either way (modulo numba availability) so the
benchmark can time them against each other on identical inputs.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.linalg import solve_banded
from scipy.signal import lfilter

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on stripped installs
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


_CHOICES = ("auto", "numba", "numpy")
_requested = os.environ.get("MEMOSTRANGE_BACKEND", "auto").strip().lower()
if _requested not in _CHOICES:
    raise ValueError(
        f"MEMOSTRANGE_BACKEND={_requested!r} not understood, expected one of {_CHOICES}"
    )
if _requested == "numba" and not HAVE_NUMBA:
    raise ImportError("MEMOSTRANGE_BACKEND=numba but numba is not importable")

USE_NUMBA = HAVE_NUMBA if _requested == "auto" else _requested == "numba"


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# negative Laplacian with homogeneous Dirichlet data, interior unknowns only


def neg_laplacian_numpy(u: np.ndarray, inv_h2: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Apply the centered -Lap stencil to an interior-node array of any rank."""
    if out is None:
        out = np.empty_like(u)
    np.multiply(u, 2.0 * float(inv_h2.sum()), out=out)
    for ax in range(u.ndim):
        c = inv_h2[ax]
        lo = [slice(None)] * u.ndim
        hi = [slice(None)] * u.ndim
        lo[ax] = slice(None, -1)
        hi[ax] = slice(1, None)
        out[tuple(lo)] -= c * u[tuple(hi)]
        out[tuple(hi)] -= c * u[tuple(lo)]
    return out


@njit(cache=True)
def _neg_lap_1d(u, out, cx):
    m = u.shape[0]
    for i in range(m):
        v = 2.0 * cx * u[i]
        if i > 0:
            v -= cx * u[i - 1]
        if i < m - 1:
            v -= cx * u[i + 1]
        out[i] = v


@njit(cache=True)
def _neg_lap_2d(u, out, cx, cy):
    mx, my = u.shape
    diag = 2.0 * (cx + cy)
    for i in range(mx):
        for j in range(my):
            v = diag * u[i, j]
            if i > 0:
                v -= cx * u[i - 1, j]
            if i < mx - 1:
                v -= cx * u[i + 1, j]
            if j > 0:
                v -= cy * u[i, j - 1]
            if j < my - 1:
                v -= cy * u[i, j + 1]
            out[i, j] = v


@njit(cache=True)
def _neg_lap_3d(u, out, cx, cy, cz):
    mx, my, mz = u.shape
    diag = 2.0 * (cx + cy + cz)
    for i in range(mx):
        for j in range(my):
            for k in range(mz):
                v = diag * u[i, j, k]
                if i > 0:
                    v -= cx * u[i - 1, j, k]
                if i < mx - 1:
                    v -= cx * u[i + 1, j, k]
                if j > 0:
                    v -= cy * u[i, j - 1, k]
                if j < my - 1:
                    v -= cy * u[i, j + 1, k]
                if k > 0:
                    v -= cz * u[i, j, k - 1]
                if k < mz - 1:
                    v -= cz * u[i, j, k + 1]
                out[i, j, k] = v


def neg_laplacian_numba(u: np.ndarray, inv_h2: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    if out is None:
        out = np.empty_like(u)
    if u.ndim == 1:
        _neg_lap_1d(u, out, inv_h2[0])
    elif u.ndim == 2:
        _neg_lap_2d(u, out, inv_h2[0], inv_h2[1])
    elif u.ndim == 3:
        _neg_lap_3d(u, out, inv_h2[0], inv_h2[1], inv_h2[2])
    else:
        # rank > 3 is study territory, not a hot path
        return neg_laplacian_numpy(u, inv_h2, out)
    return out


def neg_laplacian(u, inv_h2, out=None):
    if USE_NUMBA:
        return neg_laplacian_numba(u, inv_h2, out)
    return neg_laplacian_numpy(u, inv_h2, out)


# ---------------------------------------------------------------------------
# two-tap linear recurrence scan
#
#   y[k] = a * y[k-1] + w1 * d[k] + w0 * d[k-1],   y[0] = y0
#
# which covers every time discretization of the memory equation used here.
# d may be 1d (scalar history) or 2d with time as the leading axis.


@njit(cache=True)
def _scan_1d(a, w1, w0, d, y0, out):
    out[0] = y0
    prev = y0
    for k in range(1, d.shape[0]):
        prev = a * prev + w1 * d[k] + w0 * d[k - 1]
        out[k] = prev


@njit(cache=True)
def _scan_2d(a, w1, w0, d, y0, out):
    nt, nx = d.shape
    for j in range(nx):
        out[0, j] = y0[j]
    for k in range(1, nt):
        for j in range(nx):
            out[k, j] = a * out[k - 1, j] + w1 * d[k, j] + w0 * d[k - 1, j]


def recurrence_scan_numba(a: float, w1: float, w0: float, drive: np.ndarray, y0) -> np.ndarray:
    drive = np.ascontiguousarray(drive, dtype=np.float64)
    out = np.empty_like(drive)
    if drive.ndim == 1:
        _scan_1d(a, w1, w0, drive, float(y0), out)
    elif drive.ndim == 2:
        y0_arr = np.broadcast_to(np.asarray(y0, dtype=np.float64), drive.shape[1:]).copy()
        _scan_2d(a, w1, w0, drive, y0_arr, out)
    else:
        raise ValueError("drive must be 1d or 2d with time leading")
    return out


def recurrence_scan_numpy(a: float, w1: float, w0: float, drive: np.ndarray, y0) -> np.ndarray:
    drive = np.asarray(drive, dtype=np.float64)
    if drive.ndim not in (1, 2):
        raise ValueError("drive must be 1d or 2d with time leading")
    y0_arr = np.broadcast_to(np.asarray(y0, dtype=np.float64), drive.shape[1:])
    if drive.shape[0] == 1:
        return y0_arr[None, ...].astype(np.float64).reshape(drive.shape)
    # lfilter runs the recurrence starting at index 1; the carried state
    # injects both the y0 term and the trailing d[0] tap.
    zi = (a * y0_arr + w0 * drive[0])[None, ...]
    tail, _ = lfilter([w1, w0], [1.0, -a], drive[1:], axis=0, zi=zi)
    return np.concatenate([np.asarray(y0_arr, dtype=np.float64)[None, ...], tail], axis=0)


def recurrence_scan(a, w1, w0, drive, y0):
    if USE_NUMBA:
        return recurrence_scan_numba(a, w1, w0, drive, y0)
    return recurrence_scan_numpy(a, w1, w0, drive, y0)


# ---------------------------------------------------------------------------
# tridiagonal solve (Thomas algorithm / banded LAPACK)


@njit(cache=True)
def _thomas(lower, diag, upper, rhs, out):
    m = diag.shape[0]
    cp = np.empty(m)
    dp = np.empty(m)
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, m):
        denom = diag[i] - lower[i - 1] * cp[i - 1]
        cp[i] = upper[i] / denom if i < m - 1 else 0.0
        dp[i] = (rhs[i] - lower[i - 1] * dp[i - 1]) / denom
    out[m - 1] = dp[m - 1]
    for i in range(m - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]


def tridiag_solve_numba(lower, diag, upper, rhs):
    """Solve a tridiagonal system; lower and upper have length len(diag)-1."""
    diag = np.ascontiguousarray(diag, dtype=np.float64)
    m = diag.shape[0]
    lo = np.ascontiguousarray(lower, dtype=np.float64)
    up = np.zeros(m)
    up[: m - 1] = upper
    out = np.empty(m)
    _thomas(lo, diag, up, np.ascontiguousarray(rhs, dtype=np.float64), out)
    return out


def tridiag_solve_numpy(lower, diag, upper, rhs):
    m = len(diag)
    ab = np.zeros((3, m))
    ab[0, 1:] = upper
    ab[1, :] = diag
    ab[2, : m - 1] = lower
    return solve_banded((1, 1), ab, np.asarray(rhs, dtype=np.float64))


def tridiag_solve(lower, diag, upper, rhs):
    if USE_NUMBA:
        return tridiag_solve_numba(lower, diag, upper, rhs)
    return tridiag_solve_numpy(lower, diag, upper, rhs)


def warm_up() -> None:
    """Trigger jit compilation outside timed sections."""
    if not USE_NUMBA:
        return
    inv_h2 = np.array([1.0, 1.0, 1.0])
    neg_laplacian_numba(np.zeros(4), inv_h2[:1])
    neg_laplacian_numba(np.zeros((3, 3)), inv_h2[:2])
    neg_laplacian_numba(np.zeros((3, 3, 3)), inv_h2)
    recurrence_scan_numba(0.5, 0.5, 0.0, np.zeros(4), 0.0)
    recurrence_scan_numba(0.5, 0.5, 0.0, np.zeros((4, 2)), np.zeros(2))
    tridiag_solve_numba(np.full(3, -1.0), np.full(4, 2.0), np.full(3, -1.0), np.ones(4))
