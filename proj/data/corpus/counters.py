call_count = 0


def make_counter(start=0, step=1):
    value = start

    def advance():
        nonlocal value
        value += step
        return value

    return advance


def tracked(func):
    def wrapper(*args, **kwargs):
        global call_count
        call_count += 1
        return func(*args, **kwargs)

    return wrapper


@tracked
def scale(number, factor=2):
    return number * factor


def running_totals(numbers):
    total = 0
    out = []
    for number in numbers:
        total += number
        out.append(total)
    return out


def reset():
    global call_count
    previous, call_count = call_count, 0
    return previous
