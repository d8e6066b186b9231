import unittest


class GraphTest(unittest.TestCase):
    def build(self, directed=False):
        g = Graph(directed=directed)
        for a, b in [(1, 2), (2, 3), (3, 4), (5, 6)]:
            g.add_edge(a, b)
        return g

    def test_shortest_path(self):
        g = self.build()
        self.assertEqual(g.shortest_path(4, 1), [4, 3, 2, 1])
        self.assertIsNone(g.shortest_path(1, 6))

    def test_directed(self):
        g = self.build(directed=True)
        self.assertIsNone(g.shortest_path(4, 1))
        self.assertEqual(list(g.neighbours(2)), [3])

    def test_components(self):
        self.assertEqual(self.build().components(), [[1, 2, 3, 4], [5, 6]])
