"""Shared brute-force oracles, kept independent of the library internals."""

import itertools


def all_digraph_edges(n):
    return [(i, j) for i in range(n) for j in range(n) if i != j]


def oracle_is_acyclic(n, edges):
    """Recursive three-color DFS, independent of the library's Kahn code."""
    adj = {i: [] for i in range(n)}
    for u, v in edges:
        adj[u].append(v)
    color = {i: 0 for i in range(n)}

    def dfs(u):
        color[u] = 1
        for v in adj[u]:
            if color[v] == 1:
                return False
            if color[v] == 0 and not dfs(v):
                return False
        color[u] = 2
        return True

    return all(dfs(i) for i in range(n) if color[i] == 0)


def oracle_is_connected(n, edges):
    if n == 1:
        return True
    adj = {i: set() for i in range(n)}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    seen, stack = {0}, [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n


def enumerate_dags(n, connected_only=False):
    """All labeled DAGs on n nodes as frozensets of edges, by brute force."""
    out = []
    pool = all_digraph_edges(n)
    for k in range(len(pool) + 1):
        for edges in itertools.combinations(pool, k):
            if not oracle_is_acyclic(n, edges):
                continue
            if connected_only and not oracle_is_connected(n, edges):
                continue
            out.append(frozenset(edges))
    return out


def oracle_resolve_chain(links, start, chain):
    """Brute-force slot-chain traversal over a plain link table.

    ``links`` is a dict (class_index, object_id, slot_name) -> (class, id).
    Kept as naive double loops so it shares nothing with the library's
    resolver.
    """
    current = {start}
    for slot in chain.slots:
        nxt = set()
        if slot.inverted:
            for (ci, oid, sname), tgt in links.items():
                if sname == slot.base.name and tgt in current:
                    nxt.add((ci, oid))
        else:
            for obj in current:
                ci, oid = obj
                nxt.add(links[(ci, oid, slot.base.name)])
        current = nxt
    return current
