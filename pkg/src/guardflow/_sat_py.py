"""Pure-Python DPLL with two watched literals and chronological backtracking.

This is the fallback for the compiled kernel in ``_sat_ext.pyx``; both
implement the same algorithm and the same decision order so they return
identical models.
"""


def dpll(nvars, clauses, max_decisions):
    """Decide a CNF given as lists of non-zero ints.

    Returns ``(status, model)`` where status is 1 (SAT), 0 (UNSAT) or -1
    (decision budget exhausted).  ``model[v]`` is 0/1 for v in 1..nvars.
    """
    assign = [0] * (nvars + 1)
    occ = [0] * (nvars + 1)
    units = []
    cls = []
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
            cls.append(c)
    watches = {}
    for i, c in enumerate(cls):
        watches.setdefault(c[0], []).append(i)
        watches.setdefault(c[1], []).append(i)
    order = sorted(range(1, nvars + 1), key=lambda v: (-occ[v], v))

    trail = []
    decisions = []  # (trail length before decision, literal, flipped)

    def value(x):
        a = assign[x if x > 0 else -x]
        return a if x > 0 else -a

    def enqueue(x):
        assign[x if x > 0 else -x] = 1 if x > 0 else -1
        trail.append(x)

    def propagate(qhead):
        while qhead < len(trail):
            false_lit = -trail[qhead]
            qhead += 1
            ws = watches.get(false_lit)
            if not ws:
                continue
            keep = []
            n = len(ws)
            j = 0
            while j < n:
                i = ws[j]
                j += 1
                c = cls[i]
                if c[0] == false_lit:
                    c[0], c[1] = c[1], c[0]
                if value(c[0]) == 1:
                    keep.append(i)
                    continue
                moved = False
                for k in range(2, len(c)):
                    if value(c[k]) != -1:
                        c[1], c[k] = c[k], c[1]
                        watches.setdefault(c[1], []).append(i)
                        moved = True
                        break
                if moved:
                    continue
                keep.append(i)
                if value(c[0]) == -1:
                    keep.extend(ws[j:])
                    watches[false_lit] = keep
                    return False, qhead
                enqueue(c[0])
            watches[false_lit] = keep
        return True, qhead

    for u in units:
        v = value(u)
        if v == -1:
            return 0, []
        if v == 0:
            enqueue(u)
    ok, qhead = propagate(0)
    if not ok:
        return 0, []
    count = 0
    pos = 0
    while True:
        while pos < len(order) and assign[order[pos]] != 0:
            pos += 1
        if pos == len(order):
            return 1, [0] + [1 if a > 0 else 0 for a in assign[1:]]
        count += 1
        if count > max_decisions:
            return -1, []
        var = order[pos]
        decisions.append((len(trail), var, False))
        enqueue(var)
        ok, qhead = propagate(len(trail) - 1)
        while not ok:
            while decisions and decisions[-1][2]:
                decisions.pop()
            if not decisions:
                return 0, []
            mark, lit0, _ = decisions.pop()
            for x in trail[mark:]:
                assign[abs(x)] = 0
            del trail[mark:]
            pos = 0
            decisions.append((mark, -lit0, True))
            enqueue(-lit0)
            ok, qhead = propagate(len(trail) - 1)
