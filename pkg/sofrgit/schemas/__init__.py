# Package marker so importlib.resources can locate bundled schemas.
