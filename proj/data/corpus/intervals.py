def merge(a):
    a = sorted(a)
    r = []
    for s, e in a:
        if r and s <= r[-1][1]:
            r[-1][1] = max(r[-1][1], e)
        else:
            r.append([s, e])
    return r


def covered(a):
    return sum(e - s for s, e in merge(a))


def gaps(a, lo, hi):
    out = []
    p = lo
    for s, e in merge(a):
        if s > p:
            out.append([p, min(s, hi)])
        p = max(p, e)
        if p >= hi:
            break
    if p < hi:
        out.append([p, hi])
    return out
