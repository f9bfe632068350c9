__all__ = ["csv_report", "json_report"]
