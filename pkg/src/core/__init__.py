# Optimization engines, tuning and configuration
