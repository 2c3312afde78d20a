"""Autonomous multi-agent refactoring engine for Java projects."""

__version__ = "0.1.0"
