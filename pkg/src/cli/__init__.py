# Command-line entry point
