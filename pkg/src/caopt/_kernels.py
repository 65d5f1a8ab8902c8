"""Hot numeric loops, JIT-compiled with numba unless disabled.

Every kernel is written once, as a plain loop-style function over contiguous
float64 arrays, and wrapped with ``numba.njit`` at import time.  Setting the
environment variable ``CAOPT_DISABLE_NUMBA=1`` (or running without numba
installed) selects the interpreted fallback, which executes the exact same
statements.  Per-backend results are deterministic; across backends only
last-ulp differences from the underlying LAPACK/libm builds are possible.

Kernels signal failure through integer status codes instead of raising so
that both backends behave identically; wrappers translate codes into the
package's exception types.  ``benchmarks/backend_bench.py`` compares the two
backends' runtimes.
"""

import math
import os

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

NUMBA_ENABLED = _HAVE_NUMBA and os.environ.get("CAOPT_DISABLE_NUMBA", "") not in (
    "1",
    "true",
    "yes",
)

STATUS_OK = 0
STATUS_DEGENERATE_KERNEL = 1
STATUS_NO_POSITIVE = 2

# weights at or below SNAP_REL * max(weight) are snapped to exactly zero
SNAP_REL = 1e-14


def _maybe_jit(fn):
    if NUMBA_ENABLED:
        return njit(cache=True)(fn)
    return fn


def _eliminate_to_target_impl(F, w, target):
    # Davis-style elimination: repeatedly remove mass along a kernel vector of
    # the stacked system [F_window^T; 1^T] until at most `target` strictly
    # positive weights remain.  Works on an (n+2)-atom sliding window so each
    # step solves one (n+1) x (n+2) constrained linear system.
    # F: (k, n) moment rows, w: (k,) weights mutated in place.  target >= n+1.
    k, n = F.shape
    width = n + 2
    order = np.nonzero(w > 0.0)[0]
    na = order.size
    if na <= target:
        return STATUS_OK
    A = np.empty((n + 1, width))
    win = np.empty(width, dtype=np.int64)
    wcount = 0
    pos = 0
    while wcount < width and pos < na:
        win[wcount] = order[pos]
        wcount += 1
        pos += 1
    alive = na
    while alive > target and wcount == width:
        for c in range(width):
            col = win[c]
            for r in range(n):
                A[r, c] = F[col, r]
            A[n, c] = 1.0
        _u, _s, vt = np.linalg.svd(A)
        v = vt[width - 1].copy()
        # sign convention: component of largest magnitude is positive
        big = 0
        for c in range(1, width):
            if abs(v[c]) > abs(v[big]):
                big = c
        if abs(v[big]) < 1e-250:
            return STATUS_DEGENERATE_KERNEL
        if v[big] < 0.0:
            for c in range(width):
                v[c] = -v[c]
        # alpha = min w_i / v_i over v_i > 0, smallest atom index wins ties
        alpha = math.inf
        best_atom = -1
        for c in range(width):
            if v[c] > 0.0:
                ratio = w[win[c]] / v[c]
                if ratio < alpha or (ratio == alpha and win[c] < best_atom):
                    alpha = ratio
                    best_atom = win[c]
        if best_atom < 0:
            return STATUS_NO_POSITIVE
        wmax = 0.0
        for c in range(width):
            col = win[c]
            if col == best_atom:
                w[col] = 0.0
            else:
                w[col] -= alpha * v[c]
            if w[col] > wmax:
                wmax = w[col]
        thresh = SNAP_REL * wmax
        newcount = 0
        for c in range(width):
            col = win[c]
            if w[col] <= thresh:
                if w[col] != 0.0:
                    w[col] = 0.0
                alive -= 1
            else:
                win[newcount] = col
                newcount += 1
        wcount = newcount
        while wcount < width and pos < na:
            win[wcount] = order[pos]
            wcount += 1
            pos += 1
    return STATUS_OK


eliminate_to_target = _maybe_jit(_eliminate_to_target_impl)


def _hier_reduce_impl(F, w):
    # Divide-and-conquer reduction: split active atoms round-robin into
    # 2(n+1) groups, recombine the weighted group centroids, push surviving
    # centroid mass back to members proportionally, repeat.  Each round at
    # least halves the active support.
    N, n = F.shape
    target = n + 1
    ngroups = 2 * (n + 1)
    cent = np.empty((ngroups, n))
    cw = np.empty(ngroups)
    cw_new = np.empty(ngroups)
    while True:
        act = np.nonzero(w > 0.0)[0]
        na = act.size
        if na <= target:
            return STATUS_OK
        if na <= ngroups:
            return eliminate_to_target(F, w, target)
        for g in range(ngroups):
            cw[g] = 0.0
            for c in range(n):
                cent[g, c] = 0.0
        for p in range(na):
            g = p % ngroups
            i = act[p]
            wi = w[i]
            cw[g] += wi
            for c in range(n):
                cent[g, c] += wi * F[i, c]
        for g in range(ngroups):
            inv = 1.0 / cw[g]
            for c in range(n):
                cent[g, c] *= inv
            cw_new[g] = cw[g]
        status = eliminate_to_target(cent, cw_new, target)
        if status != STATUS_OK:
            return status
        for p in range(na):
            g = p % ngroups
            i = act[p]
            w[i] *= cw_new[g] / cw[g]


hier_reduce = _maybe_jit(_hier_reduce_impl)


def _reduced_phase_impl(
    Xs,
    ys,
    ws,
    offset,
    family,
    lam,
    theta_anchor,
    v0,
    beta,
    gamma,
    gmat,
    grad_anchor,
    hmode,
    h_dg,
    h_r,
    c_const,
    half_quad,
    strict,
    it_max_ca,
    eps_grad,
    eps_loss,
):
    # Inner descent loop on a reduced measure, governed by the control
    # statistic: step while it keeps decreasing (strictly when `strict`),
    # starting from the anchor value 0 and capped at it_max_ca evaluations.
    # A first evaluation that fails the test leaves the phase with zero
    # retained steps (the reduced measure was built in vain).
    #
    # Xs: (m, dd) support features, ws: (m,) reduced weights summing to 1,
    # offset: (m,) frozen contribution of coordinates outside the active
    # block, gmat: (dd, dd) direction premultiplier (identity for plain
    # gradient steps), hmode 0: c_const * I, 1: outer(h_dg, h_r).
    #
    # The stopping thresholds are mirrored on the reduced measure: once an
    # iterate's reduced gradient norm (or reduced loss) crosses them, the
    # phase ends with converged=True so the caller can confirm against the
    # full measure.  Pass eps_grad = eps_loss = -1 to disable.  The check is
    # skipped at the anchor itself, which the caller has already tested.
    #
    # Returns accepted iterates/controls/losses plus bookkeeping; the loss
    # recorded for each accepted iterate is the reduced-measure loss.
    m, dd = Xs.shape
    thetas = np.empty((it_max_ca, dd))
    deltas = np.empty(it_max_ca)
    losses = np.empty(it_max_ca)
    theta = theta_anchor.copy()
    v = v0.copy()
    v_keep = v0.copy()
    grad = np.empty(dd)
    direction = np.empty(dd)
    theta_new = np.empty(dd)
    n_eval = 0
    n_acc = 0
    cap_hit = False
    converged = False
    extra_forwards = 0
    delta_prev = 0.0
    rejected_delta = np.nan
    while n_eval < it_max_ca:
        loss_cur = 0.0
        for c in range(dd):
            grad[c] = 0.0
        if family == 0:  # least squares
            for i in range(m):
                ti = offset[i]
                for c in range(dd):
                    ti += Xs[i, c] * theta[c]
                r = ti - ys[i]
                wi = ws[i]
                loss_cur += wi * r * r
                s2 = 2.0 * wi * r
                for c in range(dd):
                    grad[c] += s2 * Xs[i, c]
        else:  # logistic
            for i in range(m):
                ti = offset[i]
                for c in range(dd):
                    ti += Xs[i, c] * theta[c]
                if ti >= 0.0:
                    p = 1.0 / (1.0 + math.exp(-ti))
                    sp = math.log1p(math.exp(-ti))
                    loss_i = ys[i] * sp + (1.0 - ys[i]) * (ti + sp)
                else:
                    e = math.exp(ti)
                    p = e / (1.0 + e)
                    sp = math.log1p(e)
                    loss_i = ys[i] * (sp - ti) + (1.0 - ys[i]) * sp
                wi = ws[i]
                loss_cur += wi * loss_i
                sc = wi * (p - ys[i])
                for c in range(dd):
                    grad[c] += sc * Xs[i, c]
        if lam > 0.0:
            for c in range(dd):
                x = theta[c]
                if x > 0.0:
                    loss_cur += lam * x
                    grad[c] += lam
                elif x < 0.0:
                    loss_cur -= lam * x
                    grad[c] -= lam
        if n_acc > 0 and math.isnan(losses[n_acc - 1]):
            # theta currently sits at the last accepted iterate
            losses[n_acc - 1] = loss_cur
        if n_acc > 0:
            gnorm2 = 0.0
            for c in range(dd):
                gnorm2 += grad[c] * grad[c]
            if math.sqrt(gnorm2) <= eps_grad or abs(loss_cur) <= eps_loss:
                converged = True
                extra_forwards = 1
                break
        for c in range(dd):
            v[c] = beta * v[c] + grad[c]
        for c in range(dd):
            acc = 0.0
            for c2 in range(dd):
                acc += gmat[c, c2] * v[c2]
            direction[c] = acc
        for c in range(dd):
            theta_new[c] = theta[c] - gamma * direction[c]
        lin = 0.0
        for c in range(dd):
            lin += grad_anchor[c] * (theta_new[c] - theta_anchor[c])
        if hmode == 0:
            q = 0.0
            for c in range(dd):
                dc = theta_new[c] - theta_anchor[c]
                q += dc * dc
            quad = c_const * q
        else:
            a = 0.0
            b = 0.0
            for c in range(dd):
                dc = theta_new[c] - theta_anchor[c]
                a += h_dg[c] * dc
                b += h_r[c] * dc
            quad = a * b
        if half_quad:
            delta_new = lin + 0.5 * quad
        else:
            delta_new = lin + quad
        n_eval += 1
        ok = delta_new < delta_prev
        if not ok and not strict:
            ok = delta_new == delta_prev
        if ok:
            for c in range(dd):
                thetas[n_acc, c] = theta_new[c]
                theta[c] = theta_new[c]
                v_keep[c] = v[c]
            deltas[n_acc] = delta_new
            losses[n_acc] = np.nan
            n_acc += 1
            delta_prev = delta_new
            if n_eval == it_max_ca:
                cap_hit = True
        else:
            rejected_delta = delta_new
            break
    if n_acc > 0 and math.isnan(losses[n_acc - 1]):
        # one extra forward pass for the last accepted iterate's loss
        loss_cur = 0.0
        if family == 0:
            for i in range(m):
                ti = offset[i]
                for c in range(dd):
                    ti += Xs[i, c] * theta[c]
                r = ti - ys[i]
                loss_cur += ws[i] * r * r
        else:
            for i in range(m):
                ti = offset[i]
                for c in range(dd):
                    ti += Xs[i, c] * theta[c]
                if ti >= 0.0:
                    sp = math.log1p(math.exp(-ti))
                    loss_i = ys[i] * sp + (1.0 - ys[i]) * (ti + sp)
                else:
                    e = math.exp(ti)
                    sp = math.log1p(e)
                    loss_i = ys[i] * (sp - ti) + (1.0 - ys[i]) * sp
                loss_cur += ws[i] * loss_i
        if lam > 0.0:
            for c in range(dd):
                x = theta[c]
                if x > 0.0:
                    loss_cur += lam * x
                elif x < 0.0:
                    loss_cur -= lam * x
        losses[n_acc - 1] = loss_cur
    return (
        thetas,
        deltas,
        losses,
        n_eval,
        n_acc,
        cap_hit,
        v_keep,
        rejected_delta,
        converged,
        extra_forwards,
    )


reduced_phase = _maybe_jit(_reduced_phase_impl)


def backend_name():
    return "numba" if NUMBA_ENABLED else "numpy"
