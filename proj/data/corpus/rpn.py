import operator


class CalcError(Exception):
    pass


OPERATORS = {
    "+": operator.add,
    "-": operator.sub,
    "*": operator.mul,
    "/": operator.truediv,
}


def evaluate(expression):
    stack = []
    for token in expression.split():
        if token in OPERATORS:
            try:
                right = stack.pop()
                left = stack.pop()
            except IndexError:
                raise CalcError(f"missing operand for {token}") from None
            try:
                stack.append(OPERATORS[token](left, right))
            except ZeroDivisionError:
                raise CalcError("division by zero") from None
        else:
            try:
                stack.append(float(token) if "." in token else int(token))
            except ValueError:
                raise CalcError(f"bad token {token!r}") from None
    if len(stack) != 1:
        raise CalcError("malformed expression")
    return stack[0]


def to_infix(expression):
    parts = []
    for token in expression.split():
        if token in OPERATORS:
            rhs, lhs = parts.pop(), parts.pop()
            parts.append(f"({lhs} {token} {rhs})")
        else:
            parts.append(token)
    return parts[0]
