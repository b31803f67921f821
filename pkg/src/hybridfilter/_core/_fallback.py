"""Pure numpy versions of the compiled loops; same signatures and semantics."""
import numpy as np

from ._common import NONFINITE, NOT_PSD, OK, PROJECTION, n_outputs, raise_for_status


def _project(rho, tau_psd):
    d = rho.shape[0]
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if not np.isfinite(tr):
        return rho, NONFINITE, 0.0, False
    try:
        np.linalg.cholesky(rho + tau_psd * np.eye(d))
        return rho / tr, OK, abs(tr - 1.0), False
    except np.linalg.LinAlgError:
        pass
    w, v = np.linalg.eigh(rho)
    neg = -w[w < 0].sum()
    w = np.clip(w, 0.0, None)
    wsum = w.sum()
    if not wsum > 0:
        return rho, NONFINITE, 0.0, True
    return (v * (w / wsum)) @ v.conj().T, OK, neg + abs(tr - 1.0), True


def integrate_sme(rho0, G, Hvar, coef, jumps, Lmeas, signal, dt, generate, stride, tau_psd, tau_proj):
    rho = np.array(rho0, dtype=complex)
    d = rho.shape[0]
    signal = np.asarray(signal, dtype=float)
    coef = np.asarray(coef, dtype=float)
    n_steps = signal.shape[0]
    has_coef = coef.shape[0] > 0
    if has_coef and coef.shape[0] != n_steps:
        raise ValueError("coefficient sequence length differs from the signal length")
    G = np.asarray(G, dtype=complex)
    Hvar = np.asarray(Hvar, dtype=complex)
    jumps = np.asarray(jumps, dtype=complex).reshape(-1, d, d)
    pairs = [(J, J.conj().T) for J in jumps]
    M = np.asarray(Lmeas, dtype=complex)
    Mpl = M + M.conj().T

    snaps = np.empty((n_outputs(n_steps, stride), d, d), dtype=complex)
    snaps[0] = rho
    dY = np.empty(n_steps)
    status, max_change, n_clipped, change, o = OK, 0.0, 0, 0.0, 1
    n = 0
    for n in range(n_steps):
        x = np.trace(Mpl @ rho).real
        if generate:
            dW = signal[n]
            dY[n] = x * dt + dW
        else:
            dY[n] = signal[n]
            dW = dY[n] - x * dt
        Gn = G - 1j * coef[n] * Hvar if has_coef else G
        A = Gn @ rho
        new = rho + dt * (A + A.conj().T)
        for J, Jd in pairs:
            new += dt * (J @ rho @ Jd)
        B = M @ rho
        new += dW * (B + B.conj().T - x * rho)
        new, status, change, clipped = _project(new, tau_psd)
        if status != OK:
            break
        max_change = max(max_change, change)
        if change > tau_proj:
            status = PROJECTION
            break
        n_clipped += clipped
        rho = new
        if (n + 1) % stride == 0:
            snaps[o] = rho
            o += 1
    raise_for_status(status, n, change)
    return snaps, dY, max_change, n_clipped


def _drift(x, k1, k2, alpha):
    sx, sy, sz, q2, p2 = x
    return np.array([
        -(2 * q2 / alpha) * sy - 0.5 * k1 * sx,
        (2 * q2 / alpha) * sx - 0.5 * k1 * sy,
        -k1 * (1 + sz),
        -0.5 * k2 * q2,
        -sz / (2 * alpha) - 0.5 * k2 * p2,
    ])


def _jacobian(x, k1, k2, alpha):
    sx, sy, sz, q2, p2 = x
    return np.array([
        [-k1 / 2, -2 * q2 / alpha, 0, -2 * sy / alpha, 0],
        [2 * q2 / alpha, -k1 / 2, 0, 2 * sx / alpha, 0],
        [0, 0, -k1, 0, 0],
        [0, 0, 0, -k2 / 2, 0],
        [0, 0, -1 / (2 * alpha), 0, -k2 / 2],
    ])


def _gain(x, P, k1, printed_s):
    sk1 = np.sqrt(k1)
    S = np.array([(k1 if printed_s else sk1) * x[2], 0.0, -sk1 * x[0], 0.0, 0.0])
    return S, P[:, 0] * sk1 + S


def _min_pivot(P, shift):
    try:
        np.linalg.cholesky(P + shift * np.eye(5))
        return 1.0
    except np.linalg.LinAlgError:
        return float(np.linalg.eigvalsh(P)[0])


def integrate_qekf(x0, P0, signal, dt, k1, k2, alpha, lam, mu, printed_s, stride, tau_psd):
    signal = np.asarray(signal, dtype=float)
    n_steps = signal.shape[0]
    n_out = n_outputs(n_steps, stride)
    xs, Ps, Ks = np.empty((n_out, 5)), np.empty((n_out, 5, 5)), np.empty((n_out, 5))
    innov = np.empty(n_steps)
    x = np.array(x0, dtype=float)
    P = np.array(P0, dtype=float)
    sk1 = np.sqrt(k1)
    eye = np.eye(5)
    _, K = _gain(x, P, k1, printed_s)
    xs[0], Ps[0], Ks[0] = x, P, K
    status, piv, o, n = OK, 1.0, 1, 0
    for n in range(n_steps):
        f = _drift(x, k1, k2, alpha)
        F = _jacobian(x, k1, k2, alpha)
        S, K = _gain(x, P, k1, printed_s)
        e = signal[n] - sk1 * x[0] * dt
        innov[n] = e
        FP = F @ P
        Pn = P + dt * (FP + FP.T + mu * eye + np.outer(S, S) + lam * P @ P - np.outer(K, K))
        P = 0.5 * (Pn + Pn.T)
        x = x + f * dt + K * e
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(P))):
            status = NONFINITE
            break
        piv = _min_pivot(P, tau_psd)
        if piv <= 0:
            status = NOT_PSD
            break
        if (n + 1) % stride == 0:
            _, K = _gain(x, P, k1, printed_s)
            xs[o], Ps[o], Ks[o] = x, P, K
            o += 1
    raise_for_status(status, n, piv)
    return xs, Ps, Ks, innov
