"""Interpolation of nodal samples over the closed reference domain.

Uses genuinely interpolatory splines (CubicSpline / RectBivariateSpline),
which reproduce the nodal values to machine precision; SciPy's
RegularGridInterpolator "cubic" does not, and several round-trip
invariants in this package rely on node exactness.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .grid import ReferenceGrid


def real_interpolator(grid: ReferenceGrid, values: np.ndarray):
    """Spline interpolant of flat real nodal values; returns pts -> values."""
    values = np.asarray(values, dtype=float)
    shaped = grid.reshape(values)
    if grid.dim == 1:
        if grid.shape[0] >= 4:
            spline = CubicSpline(grid.axes[0], shaped)
        else:
            axis, data = grid.axes[0], shaped

            def spline(q):
                return np.interp(q, axis, data)

        def evaluate(pts):
            pts = np.atleast_2d(np.asarray(pts, dtype=float))
            return np.asarray(spline(pts[:, 0]))

        return evaluate

    kx = min(3, grid.shape[0] - 1)
    ky = min(3, grid.shape[1] - 1)
    spline2 = RectBivariateSpline(grid.axes[0], grid.axes[1], shaped,
                                  kx=kx, ky=ky, s=0)

    def evaluate2(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return spline2.ev(pts[:, 0], pts[:, 1])

    return evaluate2


def complex_interpolator(grid: ReferenceGrid, values: np.ndarray):
    values = np.asarray(values, dtype=complex)
    re = real_interpolator(grid, values.real)
    im = real_interpolator(grid, values.imag)

    def evaluate(pts):
        return re(pts) + 1j * im(pts)

    return evaluate


def vector_interpolator(grid: ReferenceGrid, values: np.ndarray):
    """Componentwise interpolant of (n_nodes, dim) real samples."""
    values = np.asarray(values, dtype=float)
    comps = [real_interpolator(grid, values[:, a]) for a in range(values.shape[1])]

    def evaluate(pts):
        return np.stack([c(pts) for c in comps], axis=-1)

    return evaluate
