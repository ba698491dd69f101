"""Successive-shortest-path min-cost flow.

Potentials start from a Bellman-Ford (queue-based) pass so negative arc costs
are allowed; later augmentations run Dijkstra on reduced costs and stop as
soon as the sink is settled.
"""
from __future__ import annotations

import heapq
import math
from collections import deque

INF = math.inf


class MinCostFlow:
    def __init__(self, n_nodes: int):
        self.n = n_nodes
        self.adj: list[list[int]] = [[] for _ in range(n_nodes)]
        self.to: list[int] = []
        self.cap: list[int] = []
        self.cost: list[float] = []
        self._orig_cap: list[int] = []

    def add_edge(self, u: int, v: int, cap: int, cost: float) -> int:
        """Add arc ``u -> v``; returns its id for ``flow_on``."""
        if cap < 0:
            raise ValueError("capacity must be nonnegative")
        eid = len(self.to)
        self.to += [v, u]
        self.cap += [cap, 0]
        self.cost += [cost, -cost]
        self._orig_cap += [cap, 0]
        self.adj[u].append(eid)
        self.adj[v].append(eid + 1)
        return eid

    def flow_on(self, eid: int) -> int:
        return self._orig_cap[eid] - self.cap[eid]

    def _bellman_ford(self, s: int) -> list[float]:
        dist = [INF] * self.n
        dist[s] = 0.0
        queue = deque([s])
        queued = [False] * self.n
        queued[s] = True
        relax_count = [0] * self.n
        to, cap, cost, adj = self.to, self.cap, self.cost, self.adj
        while queue:
            u = queue.popleft()
            queued[u] = False
            du = dist[u]
            for e in adj[u]:
                if cap[e] > 0:
                    v = to[e]
                    nd = du + cost[e]
                    if nd < dist[v]:
                        dist[v] = nd
                        if not queued[v]:
                            relax_count[v] += 1
                            if relax_count[v] > self.n:
                                raise ValueError("negative-cost cycle in residual network")
                            queued[v] = True
                            queue.append(v)
        return [0.0 if d == INF else d for d in dist]

    def solve(self, s: int, t: int, flow_limit: int) -> tuple[int, float]:
        """Push up to ``flow_limit`` units from ``s`` to ``t`` at minimum cost.

        Returns ``(flow, cost)``. Among equal-length paths the one whose nodes
        were settled first (lower node id on ties) is used.
        """
        to, cap, cost, adj = self.to, self.cap, self.cost, self.adj
        h = self._bellman_ford(s)
        flow, total = 0, 0.0
        n = self.n
        while flow < flow_limit:
            dist = [INF] * n
            prev = [-1] * n
            done = [False] * n
            dist[s] = 0.0
            heap = [(0.0, s)]
            visited = []
            while heap:
                d, u = heapq.heappop(heap)
                if done[u]:
                    continue
                done[u] = True
                visited.append(u)
                if u == t:
                    break
                hu = h[u]
                for e in adj[u]:
                    if cap[e] > 0:
                        v = to[e]
                        if done[v]:
                            continue
                        nd = d + cost[e] + hu - h[v]
                        if nd < dist[v]:
                            dist[v] = nd
                            prev[v] = e
                            heapq.heappush(heap, (nd, v))
            if not done[t]:
                break
            dt = dist[t]
            for v in visited:
                h[v] += dist[v] - dt
            push = flow_limit - flow
            v = t
            while v != s:
                e = prev[v]
                push = min(push, cap[e])
                v = to[e ^ 1]
            v = t
            while v != s:
                e = prev[v]
                cap[e] -= push
                cap[e ^ 1] += push
                total += push * cost[e]
                v = to[e ^ 1]
            flow += push
        return flow, total
