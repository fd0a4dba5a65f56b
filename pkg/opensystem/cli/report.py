from abc import ABC, abstractmethod
from typing import Sequence


class Component(ABC):
    """Base class for text shown on the terminal."""

    @abstractmethod
    def to_plain_text(self) -> str:
        pass

    @abstractmethod
    def render(self) -> str:
        pass


class Table(Component):
    """Rows under a title, rendered with aligned columns.

    ## Example

    ```python
    table = Table(title="Acceptance", columns=["id", "status"])
    table.add_row("C1", "pass")
    print(table.render())
    ```
    """

    def __init__(self, *, title: str, columns: Sequence[str]) -> None:
        if not columns:
            raise ValueError("a table needs at least one column")

        self.title: str = title
        self.columns: list[str] = list(columns)
        self.rows: list[list[str]] = []

    def __str__(self) -> str:
        return self.render()

    def add_row(self, *values: object) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(values)}")
        self.rows.append([str(value) for value in values])

    def to_plain_text(self) -> str:
        """One `column: value` line per cell, rows separated by blank lines."""
        blocks = [self.title]
        for row in self.rows:
            blocks.append(
                "\n".join(f"{name}: {value}" for name, value in zip(self.columns, row))
            )
        return "\n\n".join(blocks)

    def render(self) -> str:
        widths = [len(name) for name in self.columns]
        for row in self.rows:
            widths = [max(width, len(value)) for width, value in zip(widths, row)]

        def line(cells: Sequence[str]) -> str:
            return "  ".join(cell.ljust(width) for cell, width in zip(cells, widths))

        rule = "  ".join("-" * width for width in widths)
        body = [line(row).rstrip() for row in self.rows]
        return "\n".join([self.title, line(self.columns).rstrip(), rule, *body])
