# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled DPLL kernel.

Same contract, decision order and two-watched-literal propagation as
``_sat_py.dpll``, on C arrays.  Unit propagation reaches the same closure
in both kernels, so they explore the same search tree and return the
same model.
"""
from libc.stdlib cimport free, malloc, realloc


cdef struct WatchList:
    int* items
    int size
    int cap


cdef inline int _lit(int x) nogil:
    # literal -> watch-list index
    return 2 * x if x > 0 else -2 * x + 1


cdef inline int _val(signed char* assign, int x) nogil:
    if x > 0:
        return assign[x]
    return -assign[-x]


cdef int _push(WatchList* w, int clause) nogil:
    cdef int* grown
    if w.size == w.cap:
        grown = <int*> realloc(w.items, (2 * w.cap + 4) * sizeof(int))
        if grown == NULL:
            return -1
        w.items = grown
        w.cap = 2 * w.cap + 4
    w.items[w.size] = clause
    w.size += 1
    return 0


cdef int _propagate(int qhead, int* lits, int* starts, WatchList* watches, signed char* assign,
                    int* trail, int* tlen) nogil:
    """Returns 1 at fixpoint, 0 on conflict, -1 when out of memory."""
    cdef int false_lit, n, j, keep, i, b, e, k, t, moved
    cdef WatchList* w
    while qhead < tlen[0]:
        false_lit = -trail[qhead]
        qhead += 1
        w = &watches[_lit(false_lit)]
        n = w.size
        j = 0
        keep = 0
        while j < n:
            i = w.items[j]
            j += 1
            b = starts[i]
            e = starts[i + 1]
            if lits[b] == false_lit:
                lits[b] = lits[b + 1]
                lits[b + 1] = false_lit
            if _val(assign, lits[b]) == 1:
                w.items[keep] = i
                keep += 1
                continue
            moved = 0
            for k in range(b + 2, e):
                if _val(assign, lits[k]) != -1:
                    t = lits[b + 1]
                    lits[b + 1] = lits[k]
                    lits[k] = t
                    if _push(&watches[_lit(lits[b + 1])], i) < 0:
                        return -1
                    moved = 1
                    break
            if moved:
                continue
            w.items[keep] = i
            keep += 1
            if _val(assign, lits[b]) == -1:
                while j < n:
                    w.items[keep] = w.items[j]
                    keep += 1
                    j += 1
                w.size = keep
                return 0
            t = lits[b]
            assign[t if t > 0 else -t] = 1 if t > 0 else -1
            trail[tlen[0]] = t
            tlen[0] += 1
        w.size = keep
    return 1


cdef inline void _enqueue(signed char* assign, int* trail, int* tlen, int x) nogil:
    assign[x if x > 0 else -x] = 1 if x > 0 else -1
    trail[tlen[0]] = x
    tlen[0] += 1


def dpll(int nvars, clauses, long max_decisions):
    """Decide a CNF given as lists of non-zero ints; see ``_sat_py.dpll``."""
    cdef list kept = []
    cdef list units = []
    cdef list occ = [0] * (nvars + 1)
    cdef int total = 0
    for c in clauses:
        c = list(dict.fromkeys(c))
        if not c:
            return 0, []
        if any(-x in c for x in c):
            continue
        for x in c:
            occ[abs(x)] += 1
        if len(c) == 1:
            units.append(c[0])
        else:
            kept.append(c)
            total += len(c)
    order_py = sorted(range(1, nvars + 1), key=lambda v: (-occ[v], v))

    cdef int m = len(kept)
    cdef int nlits = 2 * nvars + 2
    cdef int* lits = <int*> malloc((total + 1) * sizeof(int))
    cdef int* starts = <int*> malloc((m + 1) * sizeof(int))
    cdef WatchList* watches = <WatchList*> malloc(nlits * sizeof(WatchList))
    cdef signed char* assign = <signed char*> malloc((nvars + 1) * sizeof(signed char))
    cdef int* trail = <int*> malloc((nvars + 1) * sizeof(int))
    cdef int* order = <int*> malloc((nvars + 1) * sizeof(int))
    cdef int* dmark = <int*> malloc((nvars + 1) * sizeof(int))
    cdef int* dlit = <int*> malloc((nvars + 1) * sizeof(int))
    cdef signed char* dflip = <signed char*> malloc((nvars + 1) * sizeof(signed char))
    cdef int tlen = 0, nd = 0, pos = 0, i, j, k = 0, var, mark, lit0, ok, u, v
    cdef long count = 0
    cdef int status = 0
    if (lits == NULL or starts == NULL or watches == NULL or assign == NULL or trail == NULL
            or order == NULL or dmark == NULL or dlit == NULL or dflip == NULL):
        free(lits); free(starts); free(watches); free(assign); free(trail)
        free(order); free(dmark); free(dlit); free(dflip)
        raise MemoryError()
    for i in range(nlits):
        watches[i].items = NULL
        watches[i].size = 0
        watches[i].cap = 0
    try:
        for i in range(m):
            starts[i] = k
            for x in kept[i]:
                lits[k] = x
                k += 1
        starts[m] = k
        for i in range(m):
            if _push(&watches[_lit(lits[starts[i]])], i) < 0 or _push(&watches[_lit(lits[starts[i] + 1])], i) < 0:
                raise MemoryError()
        for i in range(nvars + 1):
            assign[i] = 0
        for i in range(nvars):
            order[i] = order_py[i]
        for x in units:
            u = x
            v = _val(assign, u)
            if v == -1:
                return 0, []
            if v == 0:
                _enqueue(assign, trail, &tlen, u)
        with nogil:
            ok = _propagate(0, lits, starts, watches, assign, trail, &tlen)
            if ok == 1:
                while True:
                    while pos < nvars and assign[order[pos]] != 0:
                        pos += 1
                    if pos == nvars:
                        status = 1
                        break
                    count += 1
                    if count > max_decisions:
                        status = -1
                        break
                    var = order[pos]
                    dmark[nd] = tlen
                    dlit[nd] = var
                    dflip[nd] = 0
                    nd += 1
                    _enqueue(assign, trail, &tlen, var)
                    ok = _propagate(tlen - 1, lits, starts, watches, assign, trail, &tlen)
                    while ok == 0:
                        while nd > 0 and dflip[nd - 1]:
                            nd -= 1
                        if nd == 0:
                            break
                        nd -= 1
                        mark = dmark[nd]
                        lit0 = dlit[nd]
                        for j in range(mark, tlen):
                            if trail[j] > 0:
                                assign[trail[j]] = 0
                            else:
                                assign[-trail[j]] = 0
                        tlen = mark
                        pos = 0
                        dmark[nd] = mark
                        dlit[nd] = -lit0
                        dflip[nd] = 1
                        nd += 1
                        _enqueue(assign, trail, &tlen, -lit0)
                        ok = _propagate(tlen - 1, lits, starts, watches, assign, trail, &tlen)
                    if ok != 1:
                        break
        if ok == -1:
            raise MemoryError()
        if status == 1:
            return 1, [0] + [1 if assign[i] > 0 else 0 for i in range(1, nvars + 1)]
        return status, []
    finally:
        for i in range(nlits):
            free(watches[i].items)
        free(watches)
        free(lits)
        free(starts)
        free(assign)
        free(trail)
        free(order)
        free(dmark)
        free(dlit)
        free(dflip)
