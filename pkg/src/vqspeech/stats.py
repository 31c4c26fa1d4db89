"""Pearson correlation and Welch's t-test."""

import numpy as np
from scipy.special import betainc

from .errors import DegenerateSample, LengthMismatch, TooFewPoints


def pearson_lcc(a, b, return_flag=False):
    """Pearson r in float64. Constant input yields r=0 with a flag."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"{a.shape} vs {b.shape}")
    if a.size < 2:
        raise TooFewPoints("need at least 2 points")
    da = a - a.mean()
    db = b - b.mean()
    sa = np.sqrt(np.sum(da * da))
    sb = np.sqrt(np.sum(db * db))
    if sa == 0.0 or sb == 0.0:
        return (0.0, True) if return_flag else 0.0
    r = float(np.clip(np.sum(da * db) / (sa * sb), -1.0, 1.0))
    return (r, False) if return_flag else r


def welch_ttest(a, b):
    """Welch's unequal-variance t with Welch-Satterthwaite dof.

    Returns {"t", "p", "dof"}; p is two-sided via the regularized
    incomplete beta function.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise DegenerateSample("each sample needs size >= 2")
    va = a.var(ddof=1)
    vb = b.var(ddof=1)
    if va == 0.0 and vb == 0.0:
        if a.mean() == b.mean():
            return {"t": 0.0, "p": 1.0, "dof": float(na + nb - 2)}
        raise DegenerateSample("zero variance in both samples")
    sa, sb = va / na, vb / nb
    t = (a.mean() - b.mean()) / np.sqrt(sa + sb)
    dof = (sa + sb) ** 2 / (sa ** 2 / (na - 1) + sb ** 2 / (nb - 1))
    # two-sided p = I_{dof/(dof+t^2)}(dof/2, 1/2)
    p = float(betainc(dof / 2.0, 0.5, dof / (dof + t * t)))
    return {"t": float(t), "p": p, "dof": float(dof)}
