"""Sequences ``d_1, d_2, ...`` of integers ``>= 2`` and their running products ``D_n``."""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass(frozen=True)
class DSequence:
    """``kind`` is ``"const"`` (``d_k = p``), ``"list"`` or ``"doubling"`` (``d_k = 2^(2^k)``).

    A ``"list"`` sequence uses ``values`` for ``d_1, d_2, ...`` and then either
    cycles through them (``repeat="cycle"``) or repeats the last entry
    (``repeat="last"``).
    """

    kind: str
    p: int = 0
    values: tuple[int, ...] = ()
    repeat: str = "cycle"
    _products: list = field(default_factory=lambda: [1], init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.kind == "const":
            if self.p < 2:
                raise ValueError("constant D sequence needs p >= 2")
        elif self.kind == "list":
            if not self.values or any(v < 2 for v in self.values):
                raise ValueError("list D sequence needs a nonempty list of integers >= 2")
            if self.repeat not in ("cycle", "last"):
                raise ValueError("repeat must be 'cycle' or 'last'")
            object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        elif self.kind != "doubling":
            raise ValueError(f"unknown D sequence kind {self.kind!r}")

    @classmethod
    def constant(cls, p: int) -> "DSequence":
        return cls("const", p=p)

    @classmethod
    def periodic(cls, values, repeat: str = "cycle") -> "DSequence":
        return cls("list", values=tuple(values), repeat=repeat)

    @classmethod
    def doubling(cls) -> "DSequence":
        return cls("doubling")

    def d(self, k: int) -> int:
        """``d_k`` for ``k >= 1``."""
        if k < 1:
            raise ValueError("d_k is defined for k >= 1")
        if self.kind == "const":
            return self.p
        if self.kind == "doubling":
            return 1 << (1 << k)
        if self.repeat == "cycle":
            return self.values[(k - 1) % len(self.values)]
        return self.values[min(k, len(self.values)) - 1]

    def D(self, n: int) -> int:
        """``D_n = d_1 ... d_n`` with ``D_0 = 1``."""
        products = self._products
        while len(products) <= n:
            products.append(products[-1] * self.d(len(products)))
        return products[n]

    def valuation(self, q: int) -> int:
        """Largest ``k`` with ``D_k | q``."""
        if q < 1:
            raise ValueError("q must be a positive integer")
        k = 0
        while q % self.D(k + 1) == 0:
            k += 1
        return k

    def to_json(self) -> dict:
        if self.kind == "const":
            return {"kind": "const", "p": self.p}
        if self.kind == "list":
            return {"kind": "list", "values": list(self.values), "repeat": self.repeat}
        return {"kind": "doubling"}

    @classmethod
    def from_json(cls, obj: dict) -> "DSequence":
        kind = obj["kind"]
        if kind == "const":
            return cls.constant(int(obj["p"]))
        if kind == "list":
            return cls.periodic([int(v) for v in obj["values"]], obj.get("repeat", "cycle"))
        if kind == "doubling":
            return cls.doubling()
        raise ValueError(f"unknown D sequence kind {kind!r}")

    @classmethod
    def parse(cls, text: str) -> "DSequence":
        """``const:2``, ``list:[2,3,5]`` (cycled), ``list:[2,3]:last`` or ``doubling``."""
        text = text.strip()
        if text == "doubling":
            return cls.doubling()
        head, _, rest = text.partition(":")
        if head == "const":
            return cls.constant(int(rest))
        if head == "list":
            body, _, repeat = rest.partition("]")
            values = json.loads(body + "]")
            return cls.periodic(values, repeat.lstrip(":") or "cycle")
        raise ValueError(f"cannot parse D sequence {text!r}")

    def describe(self) -> str:
        if self.kind == "const":
            return f"const:{self.p}"
        if self.kind == "list":
            return f"list:{list(self.values)}:{self.repeat}"
        return "doubling"
