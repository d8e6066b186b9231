import unittest


class MinesweeperGameTest(unittest.TestCase):
    def test_map_shape(self):
        game = MinesweeperGame(4, 2, seed=7)
        self.assertEqual(len(game.minesweeper_map), 4)
        self.assertEqual(len(game.player_map[0]), 4)
        mines = sum(row.count('X') for row in game.minesweeper_map)
        self.assertTrue(1 <= mines <= 2)

    def test_neighbour_counts(self):
        game = MinesweeperGame(5, 6, seed=3)
        board = game.minesweeper_map
        for y in range(5):
            for x in range(5):
                if board[y][x] == 'X':
                    continue
                around = 0
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        ny, nx = y + dy, x + dx
                        if 0 <= ny < 5 and 0 <= nx < 5 and board[ny][nx] == 'X':
                            around += 1
                self.assertEqual(board[y][x], around)

    def test_sweep_mine(self):
        game = MinesweeperGame(3, 1, seed=1)
        game.minesweeper_map = [['X', 1, 0], [1, 1, 0], [0, 0, 0]]
        self.assertFalse(game.sweep(0, 0))

    def test_sweep_progress_and_win(self):
        game = MinesweeperGame(2, 1, seed=1)
        game.minesweeper_map = [['X', 1], [1, 1]]
        game.player_map = [['-', '-'], ['-', '-']]
        state = game.sweep(1, 1)
        self.assertEqual(state, [['-', '-'], ['-', 1]])
        game.sweep(0, 1)
        self.assertTrue(game.sweep(1, 0))
        self.assertEqual(game.score, 3)

    def test_check_won(self):
        game = MinesweeperGame(2, 1, seed=1)
        game.minesweeper_map = [['X', 1], [1, 1]]
        self.assertFalse(game.check_won([['-', '-'], ['-', '-']]))
        self.assertTrue(game.check_won([['-', 1], [1, 1]]))


if __name__ == '__main__':
    unittest.main()
