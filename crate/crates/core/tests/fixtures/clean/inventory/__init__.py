"""Small inventory toolkit."""

from inventory.stock import Item, restock

__all__ = ["Item", "restock"]
