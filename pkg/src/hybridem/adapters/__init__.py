"""Entry points that wrap the library (command line)."""
