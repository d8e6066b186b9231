from collections import deque


class Graph:
    def __init__(self, directed=False):
        self.directed = directed
        self.adjacency = {}

    def add_edge(self, src, dst):
        self.adjacency.setdefault(src, []).append(dst)
        self.adjacency.setdefault(dst, [])
        if not self.directed:
            self.adjacency[dst].append(src)

    def neighbours(self, node):
        yield from sorted(self.adjacency.get(node, []))

    def shortest_path(self, start, goal):
        previous = {start: None}
        queue = deque([start])
        while queue:
            node = queue.popleft()
            if node == goal:
                path = []
                while node is not None:
                    path.append(node)
                    node = previous[node]
                return path[::-1]
            for nxt in self.neighbours(node):
                if nxt not in previous:
                    previous[nxt] = node
                    queue.append(nxt)
        return None

    def components(self):
        seen = set()
        groups = []
        for node in sorted(self.adjacency):
            if node in seen:
                continue
            group = self.shortest_reach(node)
            seen |= group
            groups.append(sorted(group))
        return groups

    def shortest_reach(self, origin):
        reach = {origin}
        frontier = [origin]
        while frontier:
            frontier = [n for f in frontier for n in self.neighbours(f) if n not in reach]
            reach.update(frontier)
        return reach
