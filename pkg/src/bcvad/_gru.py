"""Sequential GRU scans: the only loops that cannot be batched over time.

The recurrence runs once per 10 ms frame, so a 30 s clip needs ~3000 python
iterations; with numba available the scans compile to native loops (single
threaded, no fastmath, so results stay deterministic).  The numpy fallback
implements the same operations and is used when numba is absent.

Gate math (see model.py for the pinned convention):

    z = sigmoid(gx_z + wh_z h)      r = sigmoid(gx_r + wh_r h)
    u = wh_n h                      n = tanh(gx_n + r * u)
    h' = z * h + (1 - z) * n
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expit as _sigmoid

try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover - numba is present in the dev env
    _njit = None


def _forward_scan_py(gx, wh_t, h_all, z_all, r_all, u_all, n_all):
    batch, time, h3 = gx.shape
    hu = h3 // 3
    h = h_all[:, 0].copy()
    for t in range(time):
        gh = h @ wh_t
        z = _sigmoid(gx[:, t, :hu] + gh[:, :hu])
        r = _sigmoid(gx[:, t, hu : 2 * hu] + gh[:, hu : 2 * hu])
        u = gh[:, 2 * hu :]
        n = np.tanh(gx[:, t, 2 * hu :] + r * u)
        h = z * h + (1.0 - z) * n
        z_all[:, t] = z
        r_all[:, t] = r
        u_all[:, t] = u
        n_all[:, t] = n
        h_all[:, t + 1] = h


def _backward_scan_py(dh_head, wh, z_all, r_all, u_all, n_all, h_all, da_x, da_h):
    batch, time, hu = dh_head.shape
    carry = np.zeros((batch, hu), dtype=dh_head.dtype)
    for t in range(time - 1, -1, -1):
        z, r, u, n = z_all[:, t], r_all[:, t], u_all[:, t], n_all[:, t]
        dh = dh_head[:, t] + carry
        dn = dh * (1.0 - z) * (1.0 - n * n)
        dz = dh * (h_all[:, t] - n) * z * (1.0 - z)
        da_x[:, t, :hu] = dz
        da_x[:, t, hu : 2 * hu] = dn * u * r * (1.0 - r)
        da_x[:, t, 2 * hu :] = dn
        da_h[:, t, : 2 * hu] = da_x[:, t, : 2 * hu]
        da_h[:, t, 2 * hu :] = dn * r
        carry = dh * z + np.ascontiguousarray(da_h[:, t]) @ wh


def _forward_scan_nb(gx, wh_t, h_all, z_all, r_all, u_all, n_all):
    batch, time, h3 = gx.shape
    hu = h3 // 3
    h = h_all[:, 0].copy()
    for t in range(time):
        gh = np.dot(h, wh_t)
        for b in range(batch):
            for i in range(hu):
                z = 1.0 / (1.0 + math.exp(-(gx[b, t, i] + gh[b, i])))
                r = 1.0 / (1.0 + math.exp(-(gx[b, t, hu + i] + gh[b, hu + i])))
                u = gh[b, 2 * hu + i]
                n = math.tanh(gx[b, t, 2 * hu + i] + r * u)
                hn = z * h[b, i] + (1.0 - z) * n
                z_all[b, t, i] = z
                r_all[b, t, i] = r
                u_all[b, t, i] = u
                n_all[b, t, i] = n
                h_all[b, t + 1, i] = hn
                h[b, i] = hn


def _backward_scan_nb(dh_head, wh, z_all, r_all, u_all, n_all, h_all, da_x, da_h):
    batch, time, hu = dh_head.shape
    carry = np.zeros((batch, hu), dtype=dh_head.dtype)
    da_h_t = np.empty((batch, 3 * hu), dtype=dh_head.dtype)
    for t in range(time - 1, -1, -1):
        for b in range(batch):
            for i in range(hu):
                z = z_all[b, t, i]
                r = r_all[b, t, i]
                u = u_all[b, t, i]
                n = n_all[b, t, i]
                dh = dh_head[b, t, i] + carry[b, i]
                dn = dh * (1.0 - z) * (1.0 - n * n)
                dz = dh * (h_all[b, t, i] - n) * z * (1.0 - z)
                da_h_t[b, i] = dz
                da_h_t[b, hu + i] = dn * u * r * (1.0 - r)
                da_h_t[b, 2 * hu + i] = dn * r
                da_x[b, t, i] = dz
                da_x[b, t, hu + i] = da_h_t[b, hu + i]
                da_x[b, t, 2 * hu + i] = dn
                da_h[b, t, i] = dz
                da_h[b, t, hu + i] = da_h_t[b, hu + i]
                da_h[b, t, 2 * hu + i] = dn * r
                carry[b, i] = dh * z
        carry += np.dot(da_h_t, wh)


if _njit is not None:
    _forward_scan = _njit(cache=True)(_forward_scan_nb)
    _backward_scan = _njit(cache=True)(_backward_scan_nb)
else:  # pragma: no cover
    _forward_scan = _forward_scan_py
    _backward_scan = _backward_scan_py


def forward_scan(gx: np.ndarray, wh: np.ndarray, want_cache: bool):
    """Run the recurrence over (B, T, 3H) input projections.

    Returns h_all of shape (B, T+1, H) (zero initial state in slot 0) and,
    when caching for backprop, the per-step gate values.
    """
    batch, time, h3 = gx.shape
    hu = h3 // 3
    dtype = gx.dtype
    h_all = np.zeros((batch, time + 1, hu), dtype=dtype)
    if want_cache:
        z_all = np.empty((batch, time, hu), dtype=dtype)
        r_all = np.empty_like(z_all)
        u_all = np.empty_like(z_all)
        n_all = np.empty_like(z_all)
    else:
        z_all = r_all = u_all = n_all = np.empty((batch, 0, hu), dtype=dtype)
    gx = np.ascontiguousarray(gx)
    wh_t = np.ascontiguousarray(wh.T, dtype=dtype)  # np.dot needs one dtype
    if want_cache:
        _forward_scan(gx, wh_t, h_all, z_all, r_all, u_all, n_all)
        return h_all, (z_all, r_all, u_all, n_all)
    _forward_scan_light(gx, wh_t, h_all)
    return h_all, None


def _forward_scan_light_nb(gx, wh_t, h_all):
    batch, time, h3 = gx.shape
    hu = h3 // 3
    h = h_all[:, 0].copy()
    for t in range(time):
        gh = np.dot(h, wh_t)
        for b in range(batch):
            for i in range(hu):
                z = 1.0 / (1.0 + math.exp(-(gx[b, t, i] + gh[b, i])))
                r = 1.0 / (1.0 + math.exp(-(gx[b, t, hu + i] + gh[b, hu + i])))
                n = math.tanh(gx[b, t, 2 * hu + i] + r * gh[b, 2 * hu + i])
                hn = z * h[b, i] + (1.0 - z) * n
                h_all[b, t + 1, i] = hn
                h[b, i] = hn


def _forward_scan_light_py(gx, wh_t, h_all):
    batch, time, h3 = gx.shape
    hu = h3 // 3
    h = h_all[:, 0].copy()
    for t in range(time):
        gh = h @ wh_t
        z = _sigmoid(gx[:, t, :hu] + gh[:, :hu])
        r = _sigmoid(gx[:, t, hu : 2 * hu] + gh[:, hu : 2 * hu])
        n = np.tanh(gx[:, t, 2 * hu :] + r * gh[:, 2 * hu :])
        h = z * h + (1.0 - z) * n
        h_all[:, t + 1] = h


if _njit is not None:
    _forward_scan_light = _njit(cache=True)(_forward_scan_light_nb)
else:  # pragma: no cover
    _forward_scan_light = _forward_scan_light_py


def backward_scan(
    dh_head: np.ndarray,
    wh: np.ndarray,
    gate_cache: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    h_all: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Reverse scan producing per-gate pre-activation gradients.

    ``da_x`` rows are [dz, dr, dn] (gradients wrt the input projections and
    biases); ``da_h`` rows are [dz, dr, du] (gradients wrt the recurrent
    projections, with the reset gate applied on the candidate block).
    """
    z_all, r_all, u_all, n_all = gate_cache
    batch, time, hu = dh_head.shape
    da_x = np.empty((batch, time, 3 * hu), dtype=dh_head.dtype)
    da_h = np.empty_like(da_x)
    _backward_scan(
        np.ascontiguousarray(dh_head),
        np.ascontiguousarray(wh, dtype=dh_head.dtype),  # np.dot needs one dtype
        z_all, r_all, u_all, n_all, h_all, da_x, da_h,
    )
    return da_x, da_h
