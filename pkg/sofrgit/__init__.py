__all__ = ["core", "report", "tools"]
