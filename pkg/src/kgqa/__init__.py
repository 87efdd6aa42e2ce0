"""Knowledge-graph question parsing and dataset ambiguity auditing."""

__version__ = "0.1.0"
