"""Frequency-window selection and the truncate/smooth/rescale filter for
propagated near-field data."""
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

KERNEL_RADIUS_SIGMAS = 3.0


class InsufficientDataError(ValueError):
    pass


@dataclass
class WindowReport:
    k_lo: float
    k_hi: float
    start: int
    stop: int
    k: list
    maxima: list
    argmax: list
    candidates: list = field(default_factory=list)
    weights: tuple = (1.0, 1.0)

    def to_dict(self):
        return asdict(self)


def plane_maxima(planes):
    """Per-plane max |value| and the (i, j) pixel where it is attained."""
    planes = np.asarray(planes)
    flat = np.abs(planes).reshape(planes.shape[0], -1)
    idx = flat.argmax(axis=1)
    ij = np.stack(np.unravel_index(idx, planes.shape[1:]), axis=-1)
    return flat.max(axis=1), ij


def _spread(points):
    if len(points) < 2:
        return 0.0
    d = points[:, None, :] - points[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


def select_window(k, planes, window_len, weights=(1.0, 1.0)):
    """Choose the wavenumber window with the steadiest data maxima.

    Every window [k_s, k_s + window_len] starting at a sample is scored by
    (a) (max - min) / mean of the per-k maxima inside it and (b) the largest
    pixel distance between their argmax locations. Both are scaled to [0, 1]
    over the candidates and combined with ``weights``; the lowest score wins,
    ties going to the smaller k.
    """
    k = np.asarray(k, dtype=float)
    order = np.argsort(k, kind="stable")
    k = k[order]
    planes = np.asarray(planes)[order]
    if window_len >= k[-1] - k[0]:
        raise ValueError("window longer than the measured band")
    maxima, argmax = plane_maxima(planes)
    tol = 1e-9 * max(1.0, abs(window_len))

    cands = []
    for s in range(k.size):
        stop = np.searchsorted(k, k[s] + window_len + tol, side="right")
        if k[s] + window_len > k[-1] + tol:
            break
        if stop - s < 3:
            raise InsufficientDataError("window at k=%.4g holds fewer than 3 samples" % k[s])
        m = maxima[s:stop]
        variation = float((m.max() - m.min()) / m.mean()) if m.mean() > 0 else 0.0
        cands.append({"start": s, "stop": int(stop), "k_lo": float(k[s]), "k_hi": float(k[stop - 1]),
                      "variation": variation, "drift": _spread(argmax[s:stop])})
    if not cands:
        raise InsufficientDataError("no complete window fits in the band")

    var = np.array([c["variation"] for c in cands])
    drift = np.array([c["drift"] for c in cands])
    var_n = var / var.max() if var.max() > 0 else var
    drift_n = drift / drift.max() if drift.max() > 0 else drift
    score = weights[0] * var_n + weights[1] * drift_n
    for c, s in zip(cands, score):
        c["score"] = float(s)
    best = cands[int(np.argmin(score))]
    return WindowReport(
        k_lo=best["k_lo"], k_hi=best["k_hi"], start=best["start"], stop=best["stop"],
        k=k.tolist(), maxima=maxima.tolist(), argmax=argmax.tolist(), candidates=cands,
        weights=tuple(weights),
    )


def truncate_smooth(values, fraction=0.4, sigma=2.0):
    """Keep samples with |value| >= fraction * max, blur, and restore the peak.

    The blur is a Gaussian of ``sigma`` pixels applied separately to the real
    and imaginary parts (kernel cut at 3 sigma, zero outside the plane); the
    result is rescaled so its max modulus equals that of the thresholded data.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    values = np.asarray(values, dtype=complex)
    peak = np.abs(values).max()
    if peak == 0:
        return values.copy()
    kept = np.where(np.abs(values) >= fraction * peak, values, 0.0)
    blur = gaussian_filter(kept.real, sigma, mode="constant", truncate=KERNEL_RADIUS_SIGMAS) + 1j * gaussian_filter(
        kept.imag, sigma, mode="constant", truncate=KERNEL_RADIUS_SIGMAS
    )
    smax = np.abs(blur).max()
    if smax == 0:
        return kept
    return blur * (np.abs(kept).max() / smax)
