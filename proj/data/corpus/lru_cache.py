from collections import OrderedDict


class LRUCache:
    def __init__(self, capacity):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.store = OrderedDict()
        self.hits = 0
        self.misses = 0

    def get(self, key, default=None):
        if key in self.store:
            self.store.move_to_end(key)
            self.hits += 1
            return self.store[key]
        self.misses += 1
        return default

    def put(self, key, value):
        if key in self.store:
            self.store.move_to_end(key)
        self.store[key] = value
        while len(self.store) > self.capacity:
            self.store.popitem(last=False)

    def ratio(self):
        lookups = self.hits + self.misses
        return self.hits / lookups if lookups else 0.0


def memoize(capacity):
    def decorate(func):
        cache = LRUCache(capacity)

        def inner(arg):
            hit = cache.get(arg)
            if hit is None:
                hit = func(arg)
                cache.put(arg, hit)
            return hit

        inner.cache = cache
        return inner

    return decorate
