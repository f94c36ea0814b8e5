"""Closed-form diffeomorphism families used by the built-in scenarios.

Every constructor returns a :class:`DiffeoFamily` with analytic map,
velocity, Jacobian, Jacobian time-derivative and inverse, so no
finite-difference fallbacks are exercised on the standard paths.
"""

from __future__ import annotations

import numpy as np

from ..geometry.diffeo import DiffeoFamily


def _asfloat(y):
    return np.asarray(y, dtype=float)


def translation_family(path, velocity, accel=None, dim: int = 1,
                       window=(0.0, 1.0)) -> DiffeoFamily:
    """h(t, y) = y + D(t) for a smooth displacement path D."""

    def shift(t):
        return np.atleast_1d(np.asarray(path(t), dtype=float))

    def vel(t):
        return np.atleast_1d(np.asarray(velocity(t), dtype=float))

    def eye(t, y):
        y = _asfloat(y)
        out = np.zeros(y.shape[:-1] + (dim, dim))
        for i in range(dim):
            out[..., i, i] = 1.0
        return out

    fam = DiffeoFamily(
        map=lambda t, y: _asfloat(y) + shift(t),
        dmap_dt=lambda t, y: np.broadcast_to(vel(t), _asfloat(y).shape).copy(),
        jacobian=eye,
        jacobian_dt=lambda t, y: np.zeros(_asfloat(y).shape[:-1] + (dim, dim)),
        inverse=lambda t, x: _asfloat(x) - shift(t),
        window=window,
        name="translation",
    )
    fam.path = path
    fam.velocity_path = velocity
    fam.accel_path = accel
    return fam


def rotation_family(omega: float, window=(0.0, 1.0)) -> DiffeoFamily:
    """Rigid rotation of the plane with angular speed omega."""

    def rot(t):
        c, s = np.cos(omega * t), np.sin(omega * t)
        return np.array([[c, -s], [s, c]])

    def drot(t):
        c, s = np.cos(omega * t), np.sin(omega * t)
        return omega * np.array([[-s, -c], [c, -s]])

    fam = DiffeoFamily(
        map=lambda t, y: _asfloat(y) @ rot(t).T,
        dmap_dt=lambda t, y: _asfloat(y) @ drot(t).T,
        jacobian=lambda t, y: np.broadcast_to(
            rot(t), _asfloat(y).shape[:-1] + (2, 2)).copy(),
        jacobian_dt=lambda t, y: np.broadcast_to(
            drot(t), _asfloat(y).shape[:-1] + (2, 2)).copy(),
        inverse=lambda t, x: _asfloat(x) @ rot(t),
        window=window,
        name="rotation",
    )
    fam.omega = omega
    return fam


def diagonal_family(scales, dscales, ddscales=None, window=(0.0, 1.0),
                    name: str = "diagonal") -> DiffeoFamily:
    """h(t, y) = (f_i(t) y_i) for positive scale functions f_i."""
    dim = len(scales)

    def fvec(t):
        return np.array([f(t) for f in scales], dtype=float)

    def dfvec(t):
        return np.array([f(t) for f in dscales], dtype=float)

    def jac(t, y):
        y = _asfloat(y)
        out = np.zeros(y.shape[:-1] + (dim, dim))
        f = fvec(t)
        for i in range(dim):
            out[..., i, i] = f[i]
        return out

    def djac(t, y):
        y = _asfloat(y)
        out = np.zeros(y.shape[:-1] + (dim, dim))
        df = dfvec(t)
        for i in range(dim):
            out[..., i, i] = df[i]
        return out

    fam = DiffeoFamily(
        map=lambda t, y: _asfloat(y) * fvec(t),
        dmap_dt=lambda t, y: _asfloat(y) * dfvec(t),
        jacobian=jac,
        jacobian_dt=djac,
        inverse=lambda t, x: _asfloat(x) / fvec(t),
        window=window,
        name=name,
    )
    fam.scales = scales
    fam.dscales = dscales
    fam.ddscales = ddscales
    return fam


def interval_family(length, dlength, ddlength=None, window=(0.0, 1.0)) -> DiffeoFamily:
    """Moving interval (0, l(t)) as the 1D diagonal family h = l(t) y."""
    return diagonal_family((length,), (dlength,),
                           None if ddlength is None else (ddlength,),
                           window=window, name="moving_interval")


def homothety_family(scale, dscale, ddscale=None, dim: int = 1,
                     window=(0.0, 1.0)) -> DiffeoFamily:
    """Equal scaling of every axis, h(t, y) = f(t) y."""
    fam = diagonal_family((scale,) * dim, (dscale,) * dim,
                          None if ddscale is None else (ddscale,) * dim,
                          window=window, name="homothety")
    fam.scale = scale
    fam.dscale = dscale
    fam.ddscale = ddscale
    return fam


def warped_2d_family(a: float = 0.2, b: float = 0.3, c: float = 0.1,
                     window=(0.0, 1.0)) -> DiffeoFamily:
    """Smooth non-volume-preserving planar family with varying det J.

    h(t, y) = (y1 + t [a y1(1-y1) + c sin(pi y1) y2 (1-y2)], (1+bt) y2)
    """

    def split(y):
        y = _asfloat(y)
        return y[..., 0], y[..., 1]

    def warp(t, y1, y2):
        return a * y1 * (1 - y1) + c * np.sin(np.pi * y1) * y2 * (1 - y2)

    def fmap(t, y):
        y1, y2 = split(y)
        return np.stack([y1 + t * warp(t, y1, y2), (1 + b * t) * y2], axis=-1)

    def vel(t, y):
        y1, y2 = split(y)
        return np.stack([warp(t, y1, y2), b * y2], axis=-1)

    def jac(t, y):
        y1, y2 = split(y)
        out = np.zeros(y1.shape + (2, 2))
        out[..., 0, 0] = 1 + t * (a * (1 - 2 * y1)
                                  + c * np.pi * np.cos(np.pi * y1) * y2 * (1 - y2))
        out[..., 0, 1] = t * c * np.sin(np.pi * y1) * (1 - 2 * y2)
        out[..., 1, 1] = 1 + b * t
        return out

    def djac(t, y):
        y1, y2 = split(y)
        out = np.zeros(y1.shape + (2, 2))
        out[..., 0, 0] = (a * (1 - 2 * y1)
                          + c * np.pi * np.cos(np.pi * y1) * y2 * (1 - y2))
        out[..., 0, 1] = c * np.sin(np.pi * y1) * (1 - 2 * y2)
        out[..., 1, 1] = b
        return out

    return DiffeoFamily(
        map=fmap,
        dmap_dt=vel,
        jacobian=jac,
        jacobian_dt=djac,
        window=window,
        name="warped2d",
    )


def stretch_warp_family(alpha: float = 0.3, b: float = 0.3,
                        window=(0.0, 1.0)) -> DiffeoFamily:
    """Non-volume-preserving planar family with spatially varying det J.

    h(t, y) = (y1 + t a P(y1) sin(2 pi y2), (1 + b t) y2) with
    P(y) = (1 - cos(2 pi y)) / (2 pi), so det J = (1+bt)(1 + t a s1 s2)
    equals its spatial average at the four corners (the corner compatibility
    that a square reference domain demands of prescribed determinants).
    """

    def parts(y):
        y = _asfloat(y)
        return y[..., 0], y[..., 1]

    def fmap(t, y):
        y1, y2 = parts(y)
        P = (1.0 - np.cos(2 * np.pi * y1)) / (2 * np.pi)
        return np.stack([y1 + t * alpha * P * np.sin(2 * np.pi * y2),
                         (1 + b * t) * y2], axis=-1)

    def vel(t, y):
        y1, y2 = parts(y)
        P = (1.0 - np.cos(2 * np.pi * y1)) / (2 * np.pi)
        return np.stack([alpha * P * np.sin(2 * np.pi * y2), b * y2], axis=-1)

    def jac(t, y):
        y1, y2 = parts(y)
        P = (1.0 - np.cos(2 * np.pi * y1)) / (2 * np.pi)
        out = np.zeros(y1.shape + (2, 2))
        out[..., 0, 0] = 1 + t * alpha * np.sin(2 * np.pi * y1) * np.sin(2 * np.pi * y2)
        out[..., 0, 1] = t * alpha * P * 2 * np.pi * np.cos(2 * np.pi * y2)
        out[..., 1, 1] = 1 + b * t
        return out

    def djac(t, y):
        y1, y2 = parts(y)
        P = (1.0 - np.cos(2 * np.pi * y1)) / (2 * np.pi)
        out = np.zeros(y1.shape + (2, 2))
        out[..., 0, 0] = alpha * np.sin(2 * np.pi * y1) * np.sin(2 * np.pi * y2)
        out[..., 0, 1] = alpha * P * 2 * np.pi * np.cos(2 * np.pi * y2)
        out[..., 1, 1] = b
        return out

    return DiffeoFamily(map=fmap, dmap_dt=vel, jacobian=jac, jacobian_dt=djac,
                        window=window, name="stretch_warp")


def smoothstep(x):
    """C^2 ramp: 0 -> 1 on [0, 1] with vanishing first derivatives at the ends."""
    x = np.clip(x, 0.0, 1.0)
    return x ** 3 * (10.0 - 15.0 * x + 6.0 * x ** 2)


def smoothstep_d(x):
    x = np.asarray(x, dtype=float)
    out = np.where((x > 0.0) & (x < 1.0), 30.0 * x ** 2 * (1.0 - x) ** 2, 0.0)
    return out if out.ndim else float(out)


def ramp_interval_family(l0: float, l1: float, window=(0.0, 1.0)) -> DiffeoFamily:
    """Interval length sweeping l0 -> l1 along a C^2 ramp over the window."""
    t0, t1 = window
    span = t1 - t0

    def length(t):
        return l0 + (l1 - l0) * smoothstep((t - t0) / span)

    def dlength(t):
        return (l1 - l0) * smoothstep_d((t - t0) / span) / span

    fam = interval_family(length, dlength, window=window)
    fam.name_hint = "ramp_interval"
    return fam
