"""
Convergence Diagnostics
Gelman-Rubin, Geweke and effective sample size over stored draws
"""
import logging
from fnmatch import fnmatch
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.signal import fftconvolve

from nplcm.middleware.error_handler import DiagnosticsError

logger = logging.getLogger(__name__)

RC_THRESHOLD = 1.1
GEWEKE_THRESHOLD = 2.0
MIN_GR_LENGTH = 10
MIN_GEWEKE_LENGTH = 100


def _check_chains(chains) -> np.ndarray:
    chains = np.asarray(chains, dtype=float)
    if chains.ndim != 2 or chains.shape[0] < 2:
        raise DiagnosticsError("Gelman-Rubin needs at least two chains")
    if chains.shape[1] < MIN_GR_LENGTH:
        raise DiagnosticsError(f"Gelman-Rubin needs chains of length >= {MIN_GR_LENGTH}")
    return chains


def gelman_rubin(chains, warn: bool = True) -> float:
    """
    Potential scale reduction factor from equal-length scalar traces

    Uses the form without the (n-1)/n factor: V = W + B/n, Rc = sqrt(V / W),
    so identical chains give exactly 1.

    Args:
        chains: Array-like (m, n) with m >= 2 and n >= 10
        warn: Log a warning for degenerate traces

    Returns:
        Rc; 1.0 when the pooled variance is zero, inf when only the
        within-chain variance is zero
    """
    chains = _check_chains(chains)
    m, n = chains.shape
    if np.ptp(chains) == 0.0:
        if warn:
            logger.warning("degenerate trace: zero pooled variance, Rc reported as 1.0")
        return 1.0
    if np.all(np.ptp(chains, axis=1) == 0.0):
        return float('inf')
    means = chains.mean(axis=1)
    W = float(np.mean(chains.var(axis=1, ddof=1)))
    B = float(n * np.var(means, ddof=1))
    return float(np.sqrt((W + B / n) / W))


def spectral_variance_at_zero(trace) -> float:
    """Bartlett-window estimate of the spectral density at frequency zero, bandwidth floor(sqrt(n))"""
    x = np.asarray(trace, dtype=float)
    n = x.size
    centered = x - x.mean()
    bandwidth = int(np.floor(np.sqrt(n)))
    acov = np.array([centered[:n - h] @ centered[h:] / n for h in range(bandwidth + 1)])
    weights = 1.0 - np.arange(1, bandwidth + 1) / (bandwidth + 1.0)
    return float(acov[0] + 2.0 * np.sum(weights * acov[1:]))


def geweke(trace, frac_a: float = 0.10, frac_b: float = 0.50) -> float:
    """
    Geweke Z comparing the first frac_a and the last frac_b of a trace

    Raises:
        DiagnosticsError: invalid fractions, short trace or zero segment variance
    """
    if not (0.0 < frac_a < 1.0 and 0.0 < frac_b < 1.0):
        raise DiagnosticsError("segment fractions must lie in (0, 1)")
    if frac_a + frac_b > 1.0:
        raise DiagnosticsError("frac_a + frac_b must not exceed 1")
    x = np.asarray(trace, dtype=float).ravel()
    n = x.size
    if n < MIN_GEWEKE_LENGTH:
        raise DiagnosticsError(f"Geweke needs a trace of length >= {MIN_GEWEKE_LENGTH}")

    first = x[:int(np.floor(frac_a * n))]
    last = x[n - int(np.floor(frac_b * n)):]
    if np.ptp(first) == 0.0 or np.ptp(last) == 0.0:
        raise DiagnosticsError("zero variance in a Geweke segment")
    var_a = spectral_variance_at_zero(first) / first.size
    var_b = spectral_variance_at_zero(last) / last.size
    if var_a <= 0.0 or var_b <= 0.0:
        raise DiagnosticsError("zero variance in a Geweke segment")
    return float((first.mean() - last.mean()) / np.sqrt(var_a + var_b))


def _autocorrelation(x: np.ndarray) -> np.ndarray:
    n = x.size
    centered = x - x.mean()
    acov = fftconvolve(centered, centered[::-1], mode='full')[n - 1:] / n
    return acov / acov[0]


def effective_sample_size(chains) -> Optional[float]:
    """
    Effective sample size with Geyer's initial positive sequence

    Autocorrelations are averaged over chains; returns None for a constant trace.
    """
    chains = np.atleast_2d(np.asarray(chains, dtype=float))
    m, n = chains.shape
    varying = np.ptp(chains, axis=1) > 0.0
    if not varying.any():
        return None
    rho = np.mean([_autocorrelation(c) for c in chains[varying]], axis=0)

    pair_sum = 0.0
    for k in range(0, n - 1, 2):
        gamma = rho[k] + rho[k + 1]
        if gamma <= 0.0:
            break
        pair_sum += gamma
    tau = max(-1.0 + 2.0 * pair_sum, 1.0 / np.log10(m * n + 10))
    return float(m * n / tau)


def _select(names: Sequence[str], patterns: Optional[str]) -> List[int]:
    if not patterns:
        return list(range(len(names)))
    globs = [p.strip() for p in patterns.split(',') if p.strip()]
    return [i for i, name in enumerate(names) if any(fnmatch(name, g) for g in globs)]


def diagnostics_report(draws, parameter_filter: Optional[str] = None,
                       frac_a: float = 0.10, frac_b: float = 0.50) -> List[Dict[str, Any]]:
    """
    One row per selected parameter: {param, rc, geweke_z, ess, flagged}

    rc is None for single-chain stores; a Geweke Z is None where the segment
    variance is zero. Flagged means Rc > 1.1 or any |Z| > 2.
    """
    names = draws.names
    selected = _select(names, parameter_filter)
    rows, degenerate = [], 0
    for index in selected:
        traces = draws.draws[:, :, index]
        rc = None
        if draws.n_chains >= 2:
            rc = gelman_rubin(traces, warn=False)
            if np.ptp(traces) == 0.0:
                degenerate += 1

        z_scores = []
        for trace in traces:
            try:
                z_scores.append(geweke(trace, frac_a, frac_b))
            except DiagnosticsError as e:
                if trace.size < MIN_GEWEKE_LENGTH:
                    raise
                logger.debug(f"{names[index]}: {e.message}")
                z_scores.append(None)

        flagged = bool((rc is not None and rc > RC_THRESHOLD)
                       or any(z is not None and abs(z) > GEWEKE_THRESHOLD for z in z_scores))
        rows.append({'param': names[index], 'rc': rc, 'geweke_z': z_scores,
                     'ess': effective_sample_size(traces), 'flagged': flagged})

    if degenerate:
        logger.warning(f"degenerate trace: {degenerate} parameter(s) constant across chains, Rc reported as 1.0")
    logger.info(f"Diagnostics over {len(rows)} parameter(s); {sum(r['flagged'] for r in rows)} flagged")
    return rows


def render_table(rows: List[Dict[str, Any]]) -> str:
    """Human-readable table of a diagnostics report"""
    if not rows:
        return "(no parameters matched)"

    def fmt(value):
        if value is None:
            return '-'
        return f"{value:.3f}"

    frame = pd.DataFrame({
        'param': [r['param'] for r in rows],
        'Rc': [fmt(r['rc']) for r in rows],
        'Geweke Z': [' '.join(fmt(z) for z in r['geweke_z']) for r in rows],
        'ESS': [fmt(r['ess']) if r['ess'] is None else f"{r['ess']:.0f}" for r in rows],
        'flag': ['*' if r['flagged'] else '' for r in rows],
    })
    return frame.to_string(index=False)
