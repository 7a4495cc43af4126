"""Pure-Python composition search; the reference for ``_search_ext``.

Both implementations walk the compositions of ``k`` into ``m`` positive parts
in lexicographic order and prune with bounds built from exact per-cluster
slowdown tables. Leaf scoring follows :func:`llcpart.metrics.score`
operation for operation so results are bit-identical.
"""

FAIRNESS = 0
THROUGHPUT = 1


def search_compositions(slow, bw, lo, hi, owner, m, k, objective, peak,
                        inc_unf, inc_stp, has_inc, slack):
    """Best way vector for one fixed clustering.

    ``slow[c][w][i]`` is app ``i``'s slowdown when its cluster ``c`` owns
    ``w`` ways (``bw`` likewise for bandwidth); ``lo``/``hi`` hold running
    min/max over ``w' <= w``. ``peak <= 0`` disables the bandwidth factor.
    Returns ``(found, ways, unfairness, stp, explored, pruned)``.
    """
    if hasattr(slow, "tolist"):
        slow, bw, lo, hi = slow.tolist(), bw.tolist(), lo.tolist(), hi.tolist()
    owner = [int(c) for c in owner]
    n = len(owner)
    ways = [0] * m
    best = [False, None, 0.0, 0.0]
    stats = [0, 0]
    if has_inc:
        bound_unf, bound_stp = inc_unf, inc_stp
    else:
        bound_unf, bound_stp = float("inf"), 0.0
    thr = [bound_unf, bound_stp]

    def leaf():
        if peak > 0:
            total = 0.0
            for i in range(n):
                c = owner[i]
                total += bw[c][ways[c]][i]
            f = total / peak
            if f < 1.0:
                f = 1.0
        else:
            f = 1.0
        hi_s = -1.0
        lo_s = float("inf")
        acc = 0.0
        for i in range(n):
            c = owner[i]
            s = slow[c][ways[c]][i] * f
            if s > hi_s:
                hi_s = s
            if s < lo_s:
                lo_s = s
        for i in range(n):
            c = owner[i]
            s = slow[c][ways[c]][i] * f
            acc += 1.0 / s
        unf = hi_s / lo_s
        if best[0]:
            if objective == FAIRNESS:
                better = unf < best[2] or (unf == best[2] and acc > best[3])
            else:
                better = acc > best[3] or (acc == best[3] and unf < best[2])
        else:
            better = True
        if better:
            best[0] = True
            best[1] = tuple(ways)
            best[2] = unf
            best[3] = acc
            if objective == FAIRNESS:
                if unf < thr[0]:
                    thr[0] = unf
            elif acc > thr[1]:
                thr[1] = acc

    def prune(depth, left):
        # clusters < depth are fixed; the rest may get up to wmax ways each
        wmax = left - (m - depth - 1)
        if objective == FAIRNESS:
            lb_max = 0.0
            ub_min = float("inf")
            for i in range(n):
                c = owner[i]
                if c < depth:
                    a = slow[c][ways[c]][i]
                    b = a
                else:
                    a = lo[c][wmax][i]
                    b = hi[c][wmax][i]
                if a > lb_max:
                    lb_max = a
                if b < ub_min:
                    ub_min = b
            return lb_max / ub_min > thr[0] * (1.0 + slack)
        ub = 0.0
        for i in range(n):
            c = owner[i]
            a = slow[c][ways[c]][i] if c < depth else lo[c][wmax][i]
            ub += 1.0 / a
        return ub < thr[1] * (1.0 - slack)

    def dfs(depth, left):
        stats[0] += 1
        if depth == m:
            leaf()
            return
        if depth > 0 and (best[0] or has_inc) and prune(depth, left):
            stats[1] += 1
            return
        if depth == m - 1:
            ways[depth] = left
            dfs(depth + 1, 0)
            return
        for w in range(1, left - (m - depth - 1) + 1):
            ways[depth] = w
            dfs(depth + 1, left - w)

    if has_inc and prune(0, k):
        stats[0] += 1
        stats[1] += 1
        return False, None, 0.0, 0.0, stats[0], stats[1]
    dfs(0, k)
    return best[0], best[1], best[2], best[3], stats[0], stats[1]
