# utils/naming.py
"""
Name conversions for class labels.
Labels are stored in snake_case ("happy_active") and shown in reports as
Title-Kebab ("Happy-Active").
"""

import re


def to_kebab(s: str) -> str:
    """Convert PascalCase, camelCase or snake_case to kebab-case.
    Example: "DeskUnfrozen_run" -> "desk-unfrozen-run"
    """
    s = re.sub("([a-z0-9])([A-Z])", r"\1-\2", s)
    return s.replace("_", "-").replace(" ", "-").lower()


def to_display(s: str) -> str:
    """Report header form of a label.
    Example: "happy_active" -> "Happy-Active"
    """
    return "-".join(part.capitalize() for part in to_kebab(s).split("-") if part)
