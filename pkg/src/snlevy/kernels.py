"""Hot loops of the samplers, as numba kernels with pure-numpy twins.

Measures and weight laws are passed in a flat encoding (see
``LevyMeasure.kernel_spec`` and ``WeightLaw.kernel_spec``) so the kernels do
not touch Python objects.  Sums are accumulated relative to a reference
jump (the first series term, or the running maximum in the layered engine)
to survive tails whose jumps underflow double precision.

Both backends consume one ``numpy.random.Generator`` per partition (numba
kernels accept Generator objects directly).  They draw in a different
order, so they agree in law but not bitwise; each backend is deterministic
in the partition seeds.  Numba kernels release the GIL, so partitions run
concurrently on a thread pool.
"""

import functools
import math

import numpy as np

from ._accel import njit

KERNEL_STABLE, KERNEL_EXP, KERNEL_LOGSV, KERNEL_INDEX1, KERNEL_STEP = range(5)
W_ATOMS, W_UNIFORM, W_NORMAL = range(3)

STOP_FLOOR, STOP_REL, STOP_MAX, STOP_EXHAUSTED = range(4)

NEG_INF = -np.inf


# ---------------------------------------------------------------------------
# scalar helpers (numba)


@njit(cache=True)
def _logaddexp1(a):
    # log(e + e^a)
    if a > 1.0:
        return a + math.log1p(math.exp(1.0 - a))
    return 1.0 + math.log1p(math.exp(a - 1.0))


@njit(cache=True)
def _index_one_log_phi(z):
    # solve -w - 2 log(log(e + e^{-w})) = log z for w
    lz = math.log(z)
    w = -lz - 2.0 * math.log(_logaddexp1(lz))
    for _ in range(60):
        L = _logaddexp1(-w)
        g = -w - 2.0 * math.log(L) - lz
        sig = 1.0 / (1.0 + math.exp(min(1.0 + w, 700.0)))
        step = g / (-1.0 + 2.0 * sig / L)
        w -= step
        if abs(step) <= 1e-14 * max(1.0, abs(w)):
            break
    return w


@njit(cache=True, inline="always")
def _upper_bound(arr, x):
    # first index with arr[k] > x for ascending arr
    lo = 0
    hi = arr.shape[0]
    while lo < hi:
        mid = (lo + hi) >> 1
        if arr[mid] > x:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True, inline="always")
def _lp_stable(p, z):
    # p = (1/beta, log scale)
    return p[1] - math.log(z) * p[0]


@njit(cache=True, inline="always")
def _lp_exp(p, z):
    if z >= 1.0:
        return -math.inf
    return p[0] + math.log(-math.log(z))


@njit(cache=True, inline="always")
def _lp_logsv(p, z):
    if z > 30.0:
        return p[0] - z - math.log1p(-math.exp(-z))
    return p[0] - math.log(math.expm1(z))


@njit(cache=True, inline="always")
def _lp_step(ax, ac, z):
    k = _upper_bound(ac, z)
    if k >= ax.shape[0]:
        return -math.inf
    return math.log(ax[k])


# Kernels are specialized per (measure kind, weight kind): the codes are
# closure constants, so numba prunes the other branches.  A generic
# dispatcher that receives the unused arrays costs ~2x per term in
# reference counting alone.


def _make_log_phi(code):
    @njit(inline="always")
    def log_phi(p, ax, ac, z):
        if code == KERNEL_STABLE:
            return _lp_stable(p, z)
        elif code == KERNEL_EXP:
            return _lp_exp(p, z)
        elif code == KERNEL_LOGSV:
            return _lp_logsv(p, z)
        elif code == KERNEL_INDEX1:
            return p[0] + _index_one_log_phi(z)
        else:
            return _lp_step(ax, ac, z)

    return log_phi


def _make_draw_weight(wcode):
    @njit(inline="always")
    def draw_weight(rng, wp, wat, wcum):
        if wcode == W_UNIFORM:
            return wp[0] + (wp[1] - wp[0]) * rng.random()
        elif wcode == W_NORMAL:
            return wp[0] + wp[1] * rng.standard_normal()
        else:
            u = rng.random()
            m = wat.shape[0] - 1
            if m < 8:
                k = 0
                while k < m and wcum[k] <= u:
                    k += 1
            else:
                k = min(_upper_bound(wcum, u), m)
            return wat[k]

    return draw_weight


# ---------------------------------------------------------------------------
# series engine


@functools.lru_cache(maxsize=None)
def series_kernel(code, wcode):
    log_phi = _make_log_phi(code)
    draw_weight = _make_draw_weight(wcode)

    @njit(nogil=True)
    def block(p, ax, ac, wp, wat, wcum, t, s_star, tab_lz, tab_ls, log_rel, max_terms, rng,
              lp1, sv, su, sq, zc, nterms, stop):
        adaptive = tab_lz.shape[0] > 0
        for r in range(lp1.shape[0]):
            s_cut = s_star
            S = 0.0
            head = -math.inf
            a_v = 0.0
            a_u = 0.0
            a_q = 0.0
            n = 0
            z_last = 0.0
            reason = STOP_MAX
            while n < max_terms:
                S += rng.standard_exponential()
                z = S / t
                if z >= s_cut:
                    reason = STOP_FLOOR
                    z_last = s_cut
                    break
                lp = log_phi(p, ax, ac, z)
                if lp == -math.inf:
                    reason = STOP_EXHAUSTED
                    z_last = z
                    break
                if n == 0:
                    head = lp
                    if adaptive:
                        s_cut = max(z, math.exp(np.interp(math.log(z), tab_lz, tab_ls)))
                x = draw_weight(rng, wp, wat, wcum)
                rr = math.exp(lp - head)
                a_v += rr
                a_u += x * rr
                a_q += rr * rr
                n += 1
                z_last = z
                if lp < head + log_rel:
                    reason = STOP_REL
                    break
            lp1[r] = head
            sv[r] = a_v
            su[r] = a_u
            sq[r] = a_q
            zc[r] = z_last
            nterms[r] = n
            stop[r] = reason

    return block


def _alloc(n):
    return (np.empty(n), np.empty(n), np.empty(n), np.empty(n), np.empty(n),
            np.empty(n, dtype=np.int64), np.empty(n, dtype=np.int8))


def _map_partitions(run, n_parts, pool):
    if pool is None:
        for j in range(n_parts):
            run(j)
    else:
        list(pool.map(run, range(n_parts)))


def series_numba(mspec, wspec, t, cut, log_rel, max_terms, rngs, bounds, pool=None):
    s_star, tab_lz, tab_ls = cut
    code, p, ax, ac = mspec
    wcode, wp, wat, wcum = wspec
    block = series_kernel(int(code), int(wcode))
    out = _alloc(int(bounds[-1]))

    def run(j):
        a, b = bounds[j], bounds[j + 1]
        block(p, ax, ac, wp, wat, wcum, float(t), float(s_star), tab_lz, tab_ls,
              float(log_rel), int(max_terms),
              rngs[j], *(o[a:b] for o in out))

    _map_partitions(run, len(rngs), pool)
    return out


# ---------------------------------------------------------------------------
# numpy twins


def index_one_log_phi_vec(z):
    """Vectorized Newton solve for the index-one log-corrected inverse tail (unit scale)."""
    lz = np.log(np.asarray(z, dtype=float))
    w = -lz - 2.0 * np.log(np.logaddexp(1.0, lz))
    for _ in range(60):
        L = np.logaddexp(1.0, -w)
        g = -w - 2.0 * np.log(L) - lz
        sig = 1.0 / (1.0 + np.exp(np.minimum(1.0 + w, 700.0)))
        step = g / (-1.0 + 2.0 * sig / L)
        w = w - step
        if np.all(np.abs(step) <= 1e-14 * np.maximum(1.0, np.abs(w))):
            break
    return w


def log_phi_vec(code, p, ax, ac, z):
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if code == KERNEL_STABLE:
            return p[1] - np.log(z) * p[0]
        if code == KERNEL_EXP:
            zc = np.minimum(z, 0.5)
            return np.where(z >= 1.0, NEG_INF, p[0] + np.log(-np.log(np.where(z < 1.0, z, zc))))
        if code == KERNEL_LOGSV:
            big = z > 30.0
            zb = np.where(big, z, 31.0)
            zs = np.where(big, 1.0, z)
            return p[0] + np.where(big, -zb - np.log1p(-np.exp(-zb)), -np.log(np.expm1(zs)))
        if code == KERNEL_INDEX1:
            return p[0] + index_one_log_phi_vec(z)
        k = np.searchsorted(ac, z, side="right")
        ext = np.concatenate((np.log(ax), [NEG_INF]))
        return ext[np.minimum(k, ax.shape[0])]


def draw_weight_vec(rng, wcode, wp, wat, wcum, size):
    if wcode == W_UNIFORM:
        return wp[0] + (wp[1] - wp[0]) * rng.random(size)
    if wcode == W_NORMAL:
        return wp[0] + wp[1] * rng.standard_normal(size)
    k = np.searchsorted(wcum, rng.random(size), side="right")
    return wat[np.minimum(k, wat.shape[0] - 1)]


def _series_block_numpy(mspec, wspec, t, cut, log_rel, max_terms, rng, n):
    """Series engine on a block of replicates, in growing chunks of terms per row.

    Each pass draws ``width`` arrivals for every active replicate at once,
    so replicates that need many terms do not cost one Python iteration per term.
    """
    code, p, ax, ac = mspec
    s_star, tab_lz, tab_ls = cut
    lp1, sv, su, sq, zc, nterms, stop = _alloc(n)
    lp1.fill(NEG_INF)
    for a in (sv, su, sq, zc):
        a.fill(0.0)
    nterms.fill(0)
    stop.fill(STOP_MAX)
    s_cut = np.full(n, float(s_star))
    S = np.zeros(n)
    active = np.arange(n)
    width = 8
    cols = np.arange(4096)
    while active.size:
        m = active.size
        E = rng.standard_exponential((m, width))
        z = (S[active, None] + np.cumsum(E, axis=1)) / t
        S[active] = z[:, -1] * t
        lp = log_phi_vec(code, p, ax, ac, z)
        x = draw_weight_vec(rng, *wspec, (m, width))

        fresh = nterms[active] == 0
        old_cut = s_cut[active]
        floor0 = z[:, 0] >= old_cut
        starts = fresh & ~floor0 & (lp[:, 0] > NEG_INF)
        head = np.where(starts, lp[:, 0], lp1[active])
        cut_row = old_cut
        if tab_lz.size and np.any(starts):
            z0 = z[starts, 0]
            cut_row = old_cut.copy()
            cut_row[starts] = np.maximum(z0, np.exp(np.interp(np.log(z0), tab_lz, tab_ls)))
            s_cut[active] = cut_row

        floor = z >= cut_row[:, None]
        floor[:, 0] = np.where(fresh, floor0, floor[:, 0])
        exhausted = ~floor & (lp == NEG_INF)
        maxed = (nterms[active, None] + cols[:width]) >= max_terms
        excl = floor | exhausted | maxed
        with np.errstate(invalid="ignore"):
            relstop = ~excl & (lp < head[:, None] + log_rel)
        event = excl | relstop
        has = event.any(axis=1)
        first = np.where(has, np.argmax(event, axis=1), width)
        incl = cols[:width] < first[:, None]
        rows = np.arange(m)
        hit = has & relstop[rows, np.minimum(first, width - 1)]
        incl[hit, first[hit]] = True

        with np.errstate(invalid="ignore", over="ignore"):
            rr = np.where(incl, np.exp(lp - head[:, None]), 0.0)
        sv[active] += rr.sum(axis=1)
        su[active] += (x * rr).sum(axis=1)
        sq[active] += (rr * rr).sum(axis=1)
        added = incl.sum(axis=1)
        nterms[active] += added
        lp1[active] = np.where(nterms[active] > 0, head, NEG_INF)

        # bookkeeping for replicates that stopped in this chunk
        fc = np.minimum(first, width - 1)
        reason = np.full(m, -1, dtype=np.int8)
        zlast = np.zeros(m)
        f_floor = has & floor[rows, fc]
        f_exh = has & ~f_floor & exhausted[rows, fc]
        f_max = has & ~f_floor & ~f_exh & maxed[rows, fc]
        reason[hit] = STOP_REL
        zlast[hit] = z[hit, fc[hit]]
        reason[f_floor] = STOP_FLOOR
        zlast[f_floor] = cut_row[f_floor]
        reason[f_exh] = STOP_EXHAUSTED
        zlast[f_exh] = z[f_exh, fc[f_exh]]
        reason[f_max] = STOP_MAX
        prev = np.maximum(fc - 1, 0)
        zlast[f_max] = np.where(fc[f_max] > 0, z[f_max, prev[f_max]], zc[active[f_max]])
        done = reason >= 0
        stop[active[done]] = reason[done]
        zc[active[done]] = zlast[done]
        active = active[~done]
        if active.size:
            width = int(min(2 * width, 4096, max(8, (1 << 20) // active.size)))
    return lp1, sv, su, sq, zc, nterms, stop


def series_numpy(mspec, wspec, t, cut, log_rel, max_terms, rngs, bounds, pool=None):
    n = int(bounds[-1])
    out = _alloc(n)

    def run(j):
        a, b = bounds[j], bounds[j + 1]
        res = _series_block_numpy(mspec, wspec, t, cut, log_rel, max_terms, rngs[j], b - a)
        for dst, src in zip(out, res):
            dst[a:b] = src

    _map_partitions(run, len(rngs), pool)
    return out


# ---------------------------------------------------------------------------
# layered (shell) engine
#
# Shells are intervals (σ_{k-1}, σ_k] of the Poisson clock s; a shell holds
# Poisson(t (σ_k - σ_{k-1})) jumps φ(s) with s uniform in the interval, so
# shell k carries the jumps with sizes in [φ(σ_k), φ(σ_{k-1})).


@functools.lru_cache(maxsize=None)
def layered_kernel(code, wcode):
    log_phi = _make_log_phi(code)
    draw_weight = _make_draw_weight(wcode)

    @njit(nogil=True)
    def block(p, ax, ac, wp, wat, wcum, t, sigma, rng, lmax, sv, su, sq, njumps):
        nsh = sigma.shape[0] - 1
        for r in range(lmax.shape[0]):
            ref = -math.inf
            a_v = 0.0
            a_u = 0.0
            a_q = 0.0
            cnt = 0
            for k in range(nsh):
                lo = sigma[k]
                hi = sigma[k + 1]
                K = rng.poisson(t * (hi - lo))
                for _ in range(K):
                    s = lo + (hi - lo) * rng.random()
                    if s <= lo:
                        s = hi
                    lp = log_phi(p, ax, ac, s)
                    x = draw_weight(rng, wp, wat, wcum)
                    if lp == -math.inf:
                        continue
                    if lp > ref:
                        if ref > -math.inf:
                            c = math.exp(ref - lp)
                            a_v *= c
                            a_u *= c
                            a_q *= c * c
                        ref = lp
                    rr = math.exp(lp - ref)
                    a_v += rr
                    a_u += x * rr
                    a_q += rr * rr
                    cnt += 1
            lmax[r] = ref
            sv[r] = a_v
            su[r] = a_u
            sq[r] = a_q
            njumps[r] = cnt

    return block


def _alloc_layered(n):
    return (np.empty(n), np.empty(n), np.empty(n), np.empty(n), np.empty(n, dtype=np.int64))


def layered_numba(mspec, wspec, t, sigma, rngs, bounds, pool=None):
    code, p, ax, ac = mspec
    wcode, wp, wat, wcum = wspec
    block = layered_kernel(int(code), int(wcode))
    out = _alloc_layered(int(bounds[-1]))
    sigma = np.asarray(sigma, dtype=float)

    def run(j):
        a, b = bounds[j], bounds[j + 1]
        block(p, ax, ac, wp, wat, wcum, float(t), sigma, rngs[j], *(o[a:b] for o in out))

    _map_partitions(run, len(rngs), pool)
    return out


def _layered_block_numpy(mspec, wspec, t, sigma, rng, n):
    code, p, ax, ac = mspec
    widths = np.diff(sigma)
    counts = rng.poisson(t * widths, size=(n, widths.size))
    tot = counts.sum(axis=1)
    owner = np.repeat(np.arange(n), tot)
    shell = np.repeat(np.tile(np.arange(widths.size), n), counts.ravel())
    u = rng.random(owner.size)
    s = sigma[shell] + widths[shell] * u
    s = np.where(s <= sigma[shell], sigma[shell + 1], s)
    lp = log_phi_vec(code, p, ax, ac, s)
    x = draw_weight_vec(rng, *wspec, owner.size)
    live = lp > NEG_INF
    owner, lp, x = owner[live], lp[live], x[live]
    lmax = np.full(n, NEG_INF)
    np.maximum.at(lmax, owner, lp)
    rr = np.exp(lp - lmax[owner])
    sv = np.bincount(owner, rr, minlength=n)
    su = np.bincount(owner, x * rr, minlength=n)
    sq = np.bincount(owner, rr * rr, minlength=n)
    njumps = np.bincount(owner, minlength=n).astype(np.int64)
    return lmax, sv, su, sq, njumps


def layered_numpy(mspec, wspec, t, sigma, rngs, bounds, pool=None):
    out = _alloc_layered(int(bounds[-1]))
    sigma = np.asarray(sigma, dtype=float)

    def run(j):
        a, b = bounds[j], bounds[j + 1]
        res = _layered_block_numpy(mspec, wspec, t, sigma, rngs[j], b - a)
        for dst, src in zip(out, res):
            dst[a:b] = src

    _map_partitions(run, len(rngs), pool)
    return out
