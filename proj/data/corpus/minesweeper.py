import random


class MinesweeperGame:
    def __init__(self, n, k, seed=None) -> None:
        self.n = n
        self.k = k
        self.rng = random.Random(seed)
        self.minesweeper_map = self.generate_mine_sweeper_map()
        self.player_map = self.generate_player_map()
        self.score = 0

    def sweep(self, x, y):
        if self.minesweeper_map[x][y] == 'X':
            return False
        self.player_map[x][y] = self.minesweeper_map[x][y]
        self.score += 1
        if self.check_won(self.player_map):
            return True
        return self.player_map

    def check_won(self, board):
        for i in range(self.n):
            for j in range(self.n):
                if board[i][j] == '-' and self.minesweeper_map[i][j] != 'X':
                    return False
        return True

    def generate_mine_sweeper_map(self):
        arr = [[0 for row in range(self.n)] for column in range(self.n)]
        for num in range(self.k):
            x = self.rng.randint(0, self.n - 1)
            y = self.rng.randint(0, self.n - 1)
            arr[y][x] = 'X'
            if (x >= 0 and x <= self.n - 2) and (y >= 0 and y <= self.n - 1):
                if arr[y][x + 1] != 'X':
                    arr[y][x + 1] += 1
            if (x >= 1 and x <= self.n - 1) and (y >= 0 and y <= self.n - 1):
                if arr[y][x - 1] != 'X':
                    arr[y][x - 1] += 1
            if (x >= 1 and x <= self.n - 1) and (y >= 1 and y <= self.n - 1):
                if arr[y - 1][x - 1] != 'X':
                    arr[y - 1][x - 1] += 1
            if (x >= 0 and x <= self.n - 2) and (y >= 1 and y <= self.n - 1):
                if arr[y - 1][x + 1] != 'X':
                    arr[y - 1][x + 1] += 1
            if (x >= 0 and x <= self.n - 1) and (y >= 1 and y <= self.n - 1):
                if arr[y - 1][x] != 'X':
                    arr[y - 1][x] += 1
            if (x >= 0 and x <= self.n - 2) and (y >= 0 and y <= self.n - 2):
                if arr[y + 1][x + 1] != 'X':
                    arr[y + 1][x + 1] += 1
            if (x >= 1 and x <= self.n - 1) and (y >= 0 and y <= self.n - 2):
                if arr[y + 1][x - 1] != 'X':
                    arr[y + 1][x - 1] += 1
            if (x >= 0 and x <= self.n - 1) and (y >= 0 and y <= self.n - 2):
                if arr[y + 1][x] != 'X':
                    arr[y + 1][x] += 1
        return arr

    def generate_player_map(self):
        arr = [['-' for row in range(self.n)] for column in range(self.n)]
        return arr
