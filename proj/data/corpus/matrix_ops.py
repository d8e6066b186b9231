def identity(size):
    return [[1 if r == c else 0 for c in range(size)] for r in range(size)]


def multiply(left, right):
    rows, inner, cols = len(left), len(right), len(right[0])
    if len(left[0]) != inner:
        raise ValueError("shape mismatch")
    result = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        for j in range(cols):
            acc = 0
            for k in range(inner):
                acc += left[i][k] * right[k][j]
            result[i][j] = acc
    return result


def power(matrix, exponent):
    if exponent < 0:
        raise ValueError("negative exponent")
    base = matrix
    out = identity(len(matrix))
    while exponent:
        if exponent & 1:
            out = multiply(out, base)
        base = multiply(base, base)
        exponent >>= 1
    return out


def fibonacci(index):
    return power([[1, 1], [1, 0]], index)[0][1]
