from dataclasses import dataclass, field


@dataclass
class Item:
    name: str
    price: float
    quantity: int = 0
    tags: list = field(default_factory=list)

    def total(self):
        return self.price * self.quantity


class Inventory:
    def __init__(self):
        self.items = {}

    def add(self, item):
        existing = self.items.get(item.name)
        if existing is None:
            self.items[item.name] = item
        else:
            existing.quantity += item.quantity
        return self.items[item.name].quantity

    def remove(self, name, quantity=1):
        item = self.items[name]
        if quantity >= item.quantity:
            del self.items[name]
            return 0
        item.quantity -= quantity
        return item.quantity

    def value(self):
        return sum(item.total() for item in self.items.values())

    def tagged(self, tag):
        return sorted(item.name for item in self.items.values() if tag in item.tags)
